#include "lire/error.hpp"

namespace lire {

const char* err_name(Err code) {
    switch (code) {
        case Err::EmptyCorpus: return "EmptyCorpus";
        case Err::DuplicateId: return "DuplicateId";
        case Err::MalformedLine: return "MalformedLine";
        case Err::NegativeGrade: return "NegativeGrade";
        case Err::WrongNegativeCount: return "WrongNegativeCount";
        case Err::WrongScoreCount: return "WrongScoreCount";
        case Err::EmptyText: return "EmptyText";
        case Err::EmptyQuery: return "EmptyQuery";
        case Err::EmptyAfterTruncation: return "EmptyAfterTruncation";
        case Err::UnknownDim: return "UnknownDim";
        case Err::NonIncreasingDims: return "NonIncreasingDims";
        case Err::DegenerateToken: return "DegenerateToken";
        case Err::DegeneratePool: return "DegeneratePool";
        case Err::DimMismatch: return "DimMismatch";
        case Err::BadTemperature: return "BadTemperature";
        case Err::TieNearArgmax: return "TieNearArgmax";
        case Err::NanGradient: return "NanGradient";
        case Err::BadConfig: return "BadConfig";
        case Err::IoError: return "IoError";
        case Err::CorruptIndex: return "CorruptIndex";
        case Err::NoJudgedQueries: return "NoJudgedQueries";
    }
    return "UnknownError";
}

} // namespace lire
