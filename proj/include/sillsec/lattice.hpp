#ifndef SILLSEC_LATTICE_HPP
#define SILLSEC_LATTICE_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sillsec/error.hpp"

namespace sillsec {

// A secrecy level: either a concrete lattice level or an equality-bound
// variable introduced by a higher-order receive. Variables resolve to
// concrete levels through SecurityLattice::resolve.
struct SecLevel {
  std::string name;
  bool is_var = false;

  static SecLevel concrete(std::string n) { return {std::move(n), false}; }
  static SecLevel var(std::string n) { return {std::move(n), true}; }

  bool operator==(const SecLevel&) const = default;
  auto operator<=>(const SecLevel&) const = default;
};

struct LatticeDecl {
  std::vector<std::string> levels;
  std::vector<std::pair<std::string, std::string>> order;  // lower < upper
  Span span;
};

// A validated finite join-semilattice plus equality bindings for secrecy
// variables. Immutable value type: bind_var returns a new lattice.
class SecurityLattice {
public:
  SecurityLattice() = default;

  const std::vector<std::string>& levels() const { return levels_; }

  bool has_level(const std::string& name) const {
    return index_.count(name) > 0;
  }

  std::string resolve(const SecLevel& l) const {
    if (!l.is_var) {
      if (!has_level(l.name)) throw UnknownLevel("unknown level '" + l.name + "'");
      return l.name;
    }
    auto it = bindings_.find(l.name);
    if (it == bindings_.end())
      throw UnboundVariable("unbound secrecy variable '" + l.name + "'");
    return it->second;
  }

  bool leq(const SecLevel& x, const SecLevel& y) const {
    return leq_[idx(resolve(x))][idx(resolve(y))];
  }

  SecLevel join(const SecLevel& x, const SecLevel& y) const {
    return SecLevel::concrete(levels_[join_[idx(resolve(x))][idx(resolve(y))]]);
  }

  bool eq(const SecLevel& x, const SecLevel& y) const {
    return resolve(x) == resolve(y);
  }

  SecurityLattice bind_var(const std::string& var, const SecLevel& value) const {
    if (bindings_.count(var))
      throw DuplicateBinding("secrecy variable '" + var + "' already bound");
    SecurityLattice out = *this;
    out.bindings_.emplace(var, resolve(value));  // eager resolution
    return out;
  }

  std::optional<std::string> top() const {
    for (size_t i = 0; i < levels_.size(); ++i) {
      bool all = true;
      for (size_t j = 0; j < levels_.size(); ++j) all = all && leq_[j][i];
      if (all) return levels_[i];
    }
    return std::nullopt;
  }

  std::optional<std::string> bottom() const {
    for (size_t i = 0; i < levels_.size(); ++i) {
      bool all = true;
      for (size_t j = 0; j < levels_.size(); ++j) all = all && leq_[i][j];
      if (all) return levels_[i];
    }
    return std::nullopt;
  }

  friend SecurityLattice validate_lattice(const LatticeDecl& decl);

private:
  size_t idx(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UnknownLevel("unknown level '" + name + "'");
    return it->second;
  }

  std::vector<std::string> levels_;
  std::map<std::string, size_t> index_;
  std::vector<std::vector<bool>> leq_;    // reflexive-transitive closure
  std::vector<std::vector<size_t>> join_; // least upper bound table
  std::map<std::string, std::string> bindings_;
};

// Validates a declaration: the closure of `order` must be a partial order and
// every pair of levels must have a least upper bound.
inline SecurityLattice validate_lattice(const LatticeDecl& decl) {
  SecurityLattice lat;
  for (const auto& l : decl.levels) {
    if (lat.index_.count(l))
      throw LatticeError("duplicate level '" + l + "'", decl.span);
    lat.index_.emplace(l, lat.levels_.size());
    lat.levels_.push_back(l);
  }
  const size_t n = lat.levels_.size();
  lat.leq_.assign(n, std::vector<bool>(n, false));
  for (size_t i = 0; i < n; ++i) lat.leq_[i][i] = true;
  for (const auto& [lo, hi] : decl.order) {
    if (!lat.index_.count(lo)) throw UnknownLevel("unknown level '" + lo + "'", decl.span);
    if (!lat.index_.count(hi)) throw UnknownLevel("unknown level '" + hi + "'", decl.span);
    lat.leq_[lat.index_[lo]][lat.index_[hi]] = true;
  }
  for (size_t k = 0; k < n; ++k)
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j)
        if (lat.leq_[i][k] && lat.leq_[k][j]) lat.leq_[i][j] = true;

  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (lat.leq_[i][j] && lat.leq_[j][i])
        throw CycleError("ordering cycle through '" + lat.levels_[i] + "' and '" +
                             lat.levels_[j] + "'",
                         decl.span);

  lat.join_.assign(n, std::vector<size_t>(n, 0));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      std::vector<size_t> ubs;
      for (size_t u = 0; u < n; ++u)
        if (lat.leq_[i][u] && lat.leq_[j][u]) ubs.push_back(u);
      std::optional<size_t> least;
      for (size_t u : ubs) {
        bool min = true;
        for (size_t v : ubs) min = min && lat.leq_[u][v];
        if (min) {
          least = u;
          break;
        }
      }
      if (!least)
        throw NoJoinError("levels '" + lat.levels_[i] + "' and '" + lat.levels_[j] +
                              "' have no least upper bound",
                          decl.span);
      lat.join_[i][j] = *least;
    }
  }
  return lat;
}

}  // namespace sillsec

#endif
