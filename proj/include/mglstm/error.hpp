#pragma once

#include <stdexcept>
#include <string>

namespace mglstm {

/// Base class for every failure raised by the toolkit.
///
/// `kind()` is a stable, machine-parseable error class name. The CLI prints it
/// as the first token of its one-line error report.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind))
    {
    }

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define MGLSTM_DEFINE_ERROR(Name, Kind)                                    \
    class Name : public Error {                                            \
    public:                                                                \
        explicit Name(const std::string& what) : Error(Kind, what) {}      \
    }

MGLSTM_DEFINE_ERROR(ConfigError, "config-error");
MGLSTM_DEFINE_ERROR(IntegrationDivergence, "integration-divergence");
MGLSTM_DEFINE_ERROR(DegenerateScale, "degenerate-scale");
MGLSTM_DEFINE_ERROR(ParameterShapeError, "parameter-shape");
MGLSTM_DEFINE_ERROR(LengthMismatch, "length-mismatch");
MGLSTM_DEFINE_ERROR(UndefinedAlpha, "undefined-alpha");
MGLSTM_DEFINE_ERROR(DegenerateRelaxation, "degenerate-relaxation");
MGLSTM_DEFINE_ERROR(FormatError, "format-error");
MGLSTM_DEFINE_ERROR(StaleArtifact, "stale-artifact");
MGLSTM_DEFINE_ERROR(MissingArtifact, "missing-artifact");

#undef MGLSTM_DEFINE_ERROR

}  // namespace mglstm
