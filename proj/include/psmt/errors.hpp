#pragma once

#include <stdexcept>
#include <string>

namespace psmt {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define PSMT_ERROR(Name)              \
    struct Name : Error {             \
        using Error::Error;           \
    }

PSMT_ERROR(DivisionByZero);
PSMT_ERROR(SpecMismatch);
PSMT_ERROR(TupleTooLong);
PSMT_ERROR(DecodeError);
PSMT_ERROR(ParamError);
PSMT_ERROR(InsufficientShares);
PSMT_ERROR(MissingEntries);
PSMT_ERROR(OracleTooLarge);
PSMT_ERROR(SizeLimit);
PSMT_ERROR(PreconditionError);
PSMT_ERROR(StrategyInapplicable);
PSMT_ERROR(KeyReuse);

#undef PSMT_ERROR

}  // namespace psmt
