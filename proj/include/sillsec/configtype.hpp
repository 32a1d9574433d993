#ifndef SILLSEC_CONFIGTYPE_HPP
#define SILLSEC_CONFIGTYPE_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sillsec/runtime.hpp"

namespace sillsec {

struct ConfigTypeError {
  int node = -1;  // offending node, or -1 for interface problems
  std::string premise;
};

// Types an open configuration against the given interfaces, reconstructing
// the forest from channel reference edges. Returns the failed premise, if
// any. Channel types and secrecies come from the configuration's table.
inline std::optional<ConfigTypeError> type_config(const Configuration& c,
                                                  const std::vector<ChanRef>& delta,
                                                  const std::vector<ChanRef>& delta_prime) {
  using detail::node_uses;
  const auto& lat = c.prog->lattice;
  auto lv = [](const std::string& s) { return SecLevel::concrete(s); };

  std::set<ChanRef> dset(delta.begin(), delta.end());
  std::map<ChanRef, int> provider;
  for (size_t i = 0; i < c.nodes.size(); ++i) {
    if (provider.count(c.nodes[i].offer))
      return ConfigTypeError{int(i), "channel " + to_string(c.nodes[i].offer) +
                                         " has two providers"};
    provider[c.nodes[i].offer] = int(i);
  }

  // Every channel consumed exactly once; consumers are nodes or Δ'.
  std::map<ChanRef, int> consumer;  // -2 = interface
  for (size_t i = 0; i < c.nodes.size(); ++i) {
    for (const auto& u : node_uses(c.nodes[i])) {
      if (consumer.count(u))
        return ConfigTypeError{int(i), "channel " + to_string(u) + " consumed twice"};
      consumer[u] = int(i);
      if (!provider.count(u) && !dset.count(u))
        return ConfigTypeError{int(i), "channel " + to_string(u) + " has no provider"};
    }
  }
  for (const auto& ch : delta_prime) {
    if (consumer.count(ch))
      return ConfigTypeError{-1, "interface channel " + to_string(ch) +
                                     " is consumed internally"};
    consumer[ch] = -2;
    if (!provider.count(ch) && !dset.count(ch))
      return ConfigTypeError{-1, "offered channel " + to_string(ch) + " is not provided"};
  }
  for (const auto& [ch, i] : provider) {
    if (!consumer.count(ch))
      return ConfigTypeError{i, "channel " + to_string(ch) + " is never consumed"};
  }
  for (const auto& ch : delta) {
    if (!consumer.count(ch))
      return ConfigTypeError{-1, "interface channel " + to_string(ch) + " is unused"};
  }

  // Forest: no reference cycles.
  {
    std::vector<int> state(c.nodes.size(), 0);
    std::function<bool(int)> dfs = [&](int i) -> bool {
      state[i] = 1;
      for (const auto& u : node_uses(c.nodes[i])) {
        auto it = provider.find(u);
        if (it == provider.end()) continue;
        if (state[it->second] == 1) return false;
        if (state[it->second] == 0 && !dfs(it->second)) return false;
      }
      state[i] = 2;
      return true;
    };
    for (size_t i = 0; i < c.nodes.size(); ++i)
      if (state[i] == 0 && !dfs(int(i)))
        return ConfigTypeError{int(i), "configuration is not a forest"};
  }

  // Per-node premises: tree invariant, then the term typing judgment.
  for (size_t i = 0; i < c.nodes.size(); ++i) {
    const Node& n = c.nodes[i];
    auto offer_it = c.chan_info.find(n.offer);
    if (offer_it == c.chan_info.end())
      return ConfigTypeError{int(i), "no type for " + to_string(n.offer)};
    const std::string d = offer_it->second.sec;

    if (n.kind == NodeKind::Proc && !lat.leq(lv(n.running), lv(d)))
      return ConfigTypeError{int(i), "proc premise: running secrecy " + n.running +
                                         " ⋢ " + d};
    TypingContext ctx;
    ctx.prog = c.prog.get();
    ctx.lattice = lat;
    ctx.offer_chan = n.offer;
    ctx.offer = {offer_it->second.type, d};
    ctx.running = n.kind == NodeKind::Proc ? n.running : d;
    for (const auto& u : node_uses(n)) {
      auto it = c.chan_info.find(u);
      if (it == c.chan_info.end())
        return ConfigTypeError{int(i), "no type for " + to_string(u)};
      if (!lat.leq(lv(it->second.sec), lv(d)))
        return ConfigTypeError{int(i), "tree invariant premise: " + to_string(u) + "[" +
                                           it->second.sec + "] ⋢ " + d};
      ctx.delta[u] = {it->second.type, it->second.sec};
    }
    try {
      if (auto e = check_process(std::move(ctx), n.term))
        return ConfigTypeError{int(i), std::string(n.kind == NodeKind::Msg ? "msg" : "proc") +
                                           " body: " + e->constraint};
    } catch (const std::logic_error& e) {
      return ConfigTypeError{int(i), e.what()};
    }
  }
  return std::nullopt;
}

inline std::optional<ConfigTypeError> type_config(const Configuration& c) {
  return type_config(c, c.used, c.provided);
}

struct PreservationReport {
  bool typed = true;
  bool decreased = true;
  std::string detail;

  bool ok() const { return typed && decreased; }
};

// Thm-1-style oracle: after one step, retyping succeeds with the unchanged
// interface and the proc term-size multiset strictly decreases.
inline PreservationReport check_preservation(const Configuration& before,
                                             const Configuration& after) {
  PreservationReport rep;
  if (before.used != after.used || before.provided != after.provided) {
    rep.typed = false;
    rep.detail = "interface changed across the step";
    return rep;
  }
  if (auto e = type_config(after, before.used, before.provided)) {
    rep.typed = false;
    rep.detail = "node " + std::to_string(e->node) + ": " + e->premise;
    return rep;
  }
  if (!multiset_less(proc_term_sizes(after), proc_term_sizes(before))) {
    rep.decreased = false;
    rep.detail = "proc term-size multiset did not strictly decrease";
  }
  return rep;
}

}  // namespace sillsec

#endif
