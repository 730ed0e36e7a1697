// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include "evd/error.hpp"

namespace evd {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::State: return "state error";
    case ErrorKind::Codec: return "codec error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Structural: return "structural error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Config: return "config error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

CodecError::CodecError(const std::string& what, std::size_t offset)
    : Error(ErrorKind::Codec, what + " (at byte offset " + std::to_string(offset) + ")"),
      offset_(offset) {}

}  // namespace evd
