#ifndef SILLSEC_ERROR_HPP
#define SILLSEC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace sillsec {

// Source position, 1-based. col counts UTF-8 code points, not bytes.
struct Span {
  int line = 0;
  int col = 0;

  bool operator==(const Span&) const = default;
};

inline std::string to_string(const Span& s) {
  return std::to_string(s.line) + ":" + std::to_string(s.col);
}

// Errors raised while loading a program: lexing, parsing, name resolution,
// lattice validation. Type errors are report values, not exceptions (see
// typecheck.hpp).
class LoadError : public std::runtime_error {
public:
  LoadError(std::string what, Span span = {})
      : std::runtime_error(std::move(what)), span_(span) {}
  Span span() const { return span_; }

private:
  Span span_;
};

class SyntaxError : public LoadError {
public:
  using LoadError::LoadError;
};

class DuplicateDefinition : public LoadError {
public:
  using LoadError::LoadError;
};

class UnknownType : public LoadError {
public:
  using LoadError::LoadError;
};

class UnknownProcess : public LoadError {
public:
  using LoadError::LoadError;
};

class RecursiveType : public LoadError {
public:
  using LoadError::LoadError;
};

class UnboundChannelVar : public LoadError {
public:
  using LoadError::LoadError;
};

// Lattice declaration problems.
class LatticeError : public LoadError {
public:
  using LoadError::LoadError;
};

class CycleError : public LatticeError {
public:
  using LatticeError::LatticeError;
};

class NoJoinError : public LatticeError {
public:
  using LatticeError::LatticeError;
};

class UnknownLevel : public LatticeError {
public:
  using LatticeError::LatticeError;
};

class UnboundVariable : public LatticeError {
public:
  using LatticeError::LatticeError;
};

class DuplicateBinding : public LatticeError {
public:
  using LatticeError::LatticeError;
};

// Runtime-side failures.
class RuntimeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class StepBudgetExceeded : public RuntimeError {
public:
  using RuntimeError::RuntimeError;
};

class NotEnabled : public RuntimeError {
public:
  using RuntimeError::RuntimeError;
};

class IllTyped : public RuntimeError {
public:
  using RuntimeError::RuntimeError;
};

class ClosingIllTyped : public RuntimeError {
public:
  using RuntimeError::RuntimeError;
};

}  // namespace sillsec

#endif
