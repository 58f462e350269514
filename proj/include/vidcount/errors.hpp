#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vidcount {

enum class ErrorKind {
  geometry,  // undefined overlap between degenerate boxes
  shape,     // grid dimension mismatch
  format,    // malformed RLE or record payload
  parse,     // malformed line in an interchange file
  config,    // out-of-range configuration value
  stage,     // provider failure inside a pipeline stage
  metric,    // invalid evaluation input
  contract,  // caller violated an interface precondition
  io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& what)
      : Error(ErrorKind::geometry, what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::shape, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, std::size_t line = 0)
      : Error(ErrorKind::format,
              line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  // 1-based line number, 0 when not tied to a file position.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(ErrorKind::config, key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class StageError : public Error {
 public:
  StageError(std::string stage, int frame, const std::string& what)
      : Error(ErrorKind::stage, stage + " failed on frame " +
                                    std::to_string(frame) + ": " + what),
        stage_(std::move(stage)),
        frame_(frame) {}

  const std::string& stage() const noexcept { return stage_; }
  int frame() const noexcept { return frame_; }

 private:
  std::string stage_;
  int frame_;
};

class MetricError : public Error {
 public:
  explicit MetricError(const std::string& what) : Error(ErrorKind::metric, what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what)
      : Error(ErrorKind::contract, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

}  // namespace vidcount
