#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coopreg {

/// Base of every error raised by the library. `kind()` is the stable name
/// used in reports and certificates.
class Error : public std::runtime_error {
public:
    Error(std::string_view kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define COOPREG_DEFINE_ERROR(Name)                                       \
    class Name : public Error {                                          \
    public:                                                              \
        explicit Name(const std::string& what) : Error(#Name, what) {}  \
    }

COOPREG_DEFINE_ERROR(InvalidArgument);
COOPREG_DEFINE_ERROR(GridMismatch);
COOPREG_DEFINE_ERROR(NoConvergence);
COOPREG_DEFINE_ERROR(BlockStructureViolation);
COOPREG_DEFINE_ERROR(NonPositiveBound);
COOPREG_DEFINE_ERROR(DuplicateFrequency);
COOPREG_DEFINE_ERROR(ResonantSpectrum);
COOPREG_DEFINE_ERROR(SingularSystem);
COOPREG_DEFINE_ERROR(NotControllable);
COOPREG_DEFINE_ERROR(NewtonDivergence);
COOPREG_DEFINE_ERROR(InconsistentCertificates);
COOPREG_DEFINE_ERROR(NumericalBlowup);
COOPREG_DEFINE_ERROR(SingularStep);
COOPREG_DEFINE_ERROR(ParseError);
COOPREG_DEFINE_ERROR(SchemaError);
COOPREG_DEFINE_ERROR(IoError);

#undef COOPREG_DEFINE_ERROR

}  // namespace coopreg
