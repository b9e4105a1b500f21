#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qdual {

/// Base class for all runtime failures raised by the library. `kind` names
/// the failure class; reports and logs prefix messages with it.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what), kind_("Error") {}
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

#define QDUAL_ERROR_KIND(Name)                                              \
    struct Name : Error {                                                   \
        explicit Name(const std::string& what) : Error(#Name, what) {}     \
    }

QDUAL_ERROR_KIND(NonFinite);
QDUAL_ERROR_KIND(PhaseUndefined);
QDUAL_ERROR_KIND(NegativeDensity);
QDUAL_ERROR_KIND(NormDrift);
QDUAL_ERROR_KIND(UnresolvedField);
QDUAL_ERROR_KIND(CausticDetected);
QDUAL_ERROR_KIND(BlowUp);
QDUAL_ERROR_KIND(HorizonExceeded);
QDUAL_ERROR_KIND(CFLViolation);
QDUAL_ERROR_KIND(BorderlineKappa);
QDUAL_ERROR_KIND(FormulaMismatch);
QDUAL_ERROR_KIND(SupportMismatch);
QDUAL_ERROR_KIND(NonNormalizable);
QDUAL_ERROR_KIND(RangeWarning);

#undef QDUAL_ERROR_KIND

/// Configuration rejection with one message per offending field.
class ConfigInvalid : public Error {
public:
    explicit ConfigInvalid(std::vector<std::string> messages)
        : Error("ConfigInvalid", join(messages)), messages_(std::move(messages)) {}

    const std::vector<std::string>& messages() const { return messages_; }

private:
    static std::string join(const std::vector<std::string>& msgs) {
        std::string all = "invalid configuration:";
        for (const auto& m : msgs) all += "\n  - " + m;
        return all;
    }
    std::vector<std::string> messages_;
};

}  // namespace qdual
