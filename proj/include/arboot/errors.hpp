#pragma once

#include <stdexcept>
#include <string>

namespace arboot {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define ARBOOT_DEFINE_ERROR(Name)                                    \
  struct Name : Error {                                              \
    explicit Name(const std::string& what = #Name) : Error(what) {}  \
  }

ARBOOT_DEFINE_ERROR(RankDeficientControls);
ARBOOT_DEFINE_ERROR(ZeroMatrix);
ARBOOT_DEFINE_ERROR(NegativeTheta);
ARBOOT_DEFINE_ERROR(DegenerateInstruments);
ARBOOT_DEFINE_ERROR(ZeroKLambda);
ARBOOT_DEFINE_ERROR(SingularGram);
ARBOOT_DEFINE_ERROR(SingularOmega);
ARBOOT_DEFINE_ERROR(DegenerateColumn);
ARBOOT_DEFINE_ERROR(DegenerateDenominator);
ARBOOT_DEFINE_ERROR(InvalidSparsity);
ARBOOT_DEFINE_ERROR(UnsupportedK);
ARBOOT_DEFINE_ERROR(ZeroColumn);
ARBOOT_DEFINE_ERROR(ParseError);
ARBOOT_DEFINE_ERROR(MissingColumn);
ARBOOT_DEFINE_ERROR(NonFinite);

#undef ARBOOT_DEFINE_ERROR

}  // namespace arboot
