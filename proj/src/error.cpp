#include "reef/error.hpp"

namespace reef {

ValidationError::ValidationError(const std::string& field,
                                 const std::string& what)
    : Error(ErrorKind::kValidation,
            field.empty() ? what : field + ": " + what),
      field_(field) {}

ParseError::ParseError(std::size_t line, const std::string& what)
    : ValidationError("", "line " + std::to_string(line) + ": " + what),
      line_(line) {}

}  // namespace reef
