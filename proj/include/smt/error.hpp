// Copyright 2026 The SMT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace smt {

enum class ErrorCode {
  Dimension,
  State,
  Label,
  Numeric,
  Config,
  Input,
  Format,
  Split,
  Io,
  Divergence,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the training loop when the loss stops being finite.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, std::size_t step, const std::string& what)
      : Error(ErrorCode::Divergence, what), epoch_(epoch), step_(step) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t epoch_;
  std::size_t step_;
};

}  // namespace smt
