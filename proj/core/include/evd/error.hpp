// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evd {

enum class ErrorKind {
  Shape,
  Domain,
  Parameter,
  Dimension,
  State,
  Codec,
  Data,
  Structural,
  Numeric,
  Config,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base class of every error raised by the library. The kind lets callers
/// (the CLI in particular) map failures onto exit-code categories.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

#define EVD_DEFINE_ERROR(Name, Kind)                                                   \
  class Name : public Error {                                                          \
  public:                                                                              \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {}           \
  };

EVD_DEFINE_ERROR(ShapeError, Shape)
EVD_DEFINE_ERROR(DomainError, Domain)
EVD_DEFINE_ERROR(ParameterError, Parameter)
EVD_DEFINE_ERROR(DimensionError, Dimension)
EVD_DEFINE_ERROR(StateError, State)
EVD_DEFINE_ERROR(DataError, Data)
EVD_DEFINE_ERROR(StructuralError, Structural)
EVD_DEFINE_ERROR(NumericError, Numeric)
EVD_DEFINE_ERROR(ConfigError, Config)

#undef EVD_DEFINE_ERROR

/// Malformed or truncated binary input. `offset` is the byte position at
/// which decoding failed.
class CodecError : public Error {
public:
  CodecError(const std::string& what, std::size_t offset);
  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

}  // namespace evd
