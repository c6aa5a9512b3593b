#pragma once

#include <stdexcept>
#include <string>

namespace lire {

enum class Err {
    EmptyCorpus,
    DuplicateId,
    MalformedLine,
    NegativeGrade,
    WrongNegativeCount,
    WrongScoreCount,
    EmptyText,
    EmptyQuery,
    EmptyAfterTruncation,
    UnknownDim,
    NonIncreasingDims,
    DegenerateToken,
    DegeneratePool,
    DimMismatch,
    BadTemperature,
    TieNearArgmax,
    NanGradient,
    BadConfig,
    IoError,
    CorruptIndex,
    NoJudgedQueries,
};

const char* err_name(Err code);

/// Library error. `code` identifies the failure class; the message carries
/// context (line numbers, offending ids, shapes).
class Error : public std::runtime_error {
public:
    Error(Err code, const std::string& msg)
        : std::runtime_error(std::string(err_name(code)) + ": " + msg), code_(code) {}

    Err code() const { return code_; }

private:
    Err code_;
};

} // namespace lire
