#include "minbal/errors.hpp"

namespace minbal {

const char* to_string(DataError::Code code) noexcept {
    switch (code) {
    case DataError::Code::Generic: return "generic";
    case DataError::Code::FileNotFound: return "file_not_found";
    case DataError::Code::EmptyFile: return "empty_file";
    case DataError::Code::MissingColumn: return "missing_column";
    case DataError::Code::ParseFailure: return "parse_failure";
    case DataError::Code::NonFiniteValue: return "non_finite_value";
    case DataError::Code::InvalidIndicator: return "invalid_indicator";
    case DataError::Code::DimensionMismatch: return "dimension_mismatch";
    case DataError::Code::EmptyGroup: return "empty_group";
    }
    return "unknown";
}

} // namespace minbal
