#ifndef SILLSEC_SECURITY_HPP
#define SILLSEC_SECURITY_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sillsec/configtype.hpp"
#include "sillsec/runtime.hpp"

namespace sillsec {

struct Observer {
  std::string level;
};

// ---------------------------------------------------------------------------
// Projections and observer-relative machinery
// ---------------------------------------------------------------------------

inline bool observable(const Configuration& c, const ChanRef& ch, const std::string& xi) {
  const auto& info = c.chan_info.at(ch);
  return c.prog->lattice.leq(SecLevel::concrete(info.sec), SecLevel::concrete(xi));
}

// Keeps exactly the entries whose secrecy is ⊑ ξ, order preserved.
inline std::vector<ChanRef> project(const Configuration& c, const std::vector<ChanRef>& ctx,
                                    const std::string& xi) {
  std::vector<ChanRef> out;
  for (const auto& ch : ctx)
    if (observable(c, ch, xi)) out.push_back(ch);
  return out;
}

// Quasi running secrecy per node: receives look one step ahead; messages
// borrow from carrier and parent. Top-down over the forest.
inline std::vector<std::string> quasi_secrecy(const Configuration& c) {
  const auto& lat = c.prog->lattice;
  auto lv = [](const std::string& s) { return SecLevel::concrete(s); };
  auto join = [&](const std::string& a, const std::string& b) {
    return lat.join(lv(a), lv(b)).name;
  };
  auto sec_of = [&](const ChanRef& ch) { return c.chan_info.at(ch).sec; };

  auto parent = detail::parents(c);
  std::vector<std::string> out(c.nodes.size());
  std::vector<char> done(c.nodes.size(), 0);
  std::function<void(int)> fill = [&](int i) {
    if (done[i]) return;
    done[i] = 1;
    const Node& n = c.nodes[i];
    if (n.kind == NodeKind::Proc) {
      const TermRef& t = n.term;
      bool receives = t->kind == TermKind::Case || t->kind == TermKind::RecvChan;
      if (receives) {
        const ChanRef& y = t->subject;
        out[i] = join(n.running, sec_of(y));
      } else {
        out[i] = n.running;
      }
      return;
    }
    // Message: negative takes the carrier level; positive joins the parent's.
    std::string carrier = sec_of(n.term->subject);
    if (!detail::is_positive_msg(n)) {
      out[i] = carrier;
      return;
    }
    if (parent[i] >= 0) {
      fill(parent[i]);
      out[i] = join(out[parent[i]], carrier);
    } else {
      out[i] = carrier;
    }
  };
  for (size_t i = 0; i < c.nodes.size(); ++i) fill(int(i));
  return out;
}

struct RelevantProjection {
  std::vector<int> nodes;          // indices of relevant nodes, in order
  std::set<ChanRef> channels;      // relevant channels
  std::vector<std::string> quasi;  // per node, for diagnostics
};

// Bottom-up fixpoint: a channel is relevant when it is observable (in the
// seed) or shares a low-quasi node with a relevant channel.
inline RelevantProjection relevant_projection(const Configuration& c,
                                              const std::vector<ChanRef>& iface,
                                              const std::string& xi) {
  const auto& lat = c.prog->lattice;
  auto lv = [](const std::string& s) { return SecLevel::concrete(s); };
  auto low = [&](const std::string& s) { return lat.leq(lv(s), lv(xi)); };

  RelevantProjection out;
  out.quasi = quasi_secrecy(c);
  for (const auto& ch : iface)
    if (low(c.chan_info.at(ch).sec)) out.channels.insert(ch);

  std::vector<std::vector<ChanRef>> touch(c.nodes.size());
  for (size_t i = 0; i < c.nodes.size(); ++i) {
    touch[i] = detail::node_uses(c.nodes[i]);
    touch[i].push_back(c.nodes[i].offer);
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 0; i < c.nodes.size(); ++i) {
      if (!low(out.quasi[i])) continue;
      bool shares = false;
      for (const auto& ch : touch[i]) shares = shares || out.channels.count(ch);
      if (!shares) continue;
      for (const auto& ch : touch[i]) {
        if (!low(c.chan_info.at(ch).sec)) continue;
        if (out.channels.insert(ch).second) changed = true;
      }
    }
  }
  for (size_t i = 0; i < c.nodes.size(); ++i) {
    if (!low(out.quasi[i])) continue;
    bool touches = false;
    for (const auto& ch : touch[i]) touches = touches || out.channels.count(ch);
    if (touches) out.nodes.push_back(int(i));
  }
  return out;
}

namespace detail {

// Canonical rendering of a relevant projection: channels above or
// incomparable to the observer are renamed in first-occurrence order, so two
// projections are =_ξ equal iff their renderings are byte-equal.
inline std::string render_projection(const Configuration& c, const RelevantProjection& rp,
                                     const std::string& xi) {
  const auto& lat = c.prog->lattice;
  auto low = [&](const ChanRef& ch) {
    return lat.leq(SecLevel::concrete(c.chan_info.at(ch).sec), SecLevel::concrete(xi));
  };
  std::map<ChanRef, std::string> hi_names;
  auto canon = [&](const ChanRef& ch) -> std::string {
    if (c.chan_info.count(ch) && low(ch)) return to_string(ch);
    auto it = hi_names.find(ch);
    if (it == hi_names.end())
      it = hi_names.emplace(ch, "hi" + std::to_string(hi_names.size())).first;
    return it->second;
  };
  std::ostringstream os;
  std::function<void(const TermRef&)> rt = [&](const TermRef& t) {
    if (!t) {
      os << ".";
      return;
    }
    os << int(t->kind) << "(";
    if (t->subject.gen >= 0 || !t->subject.name.empty()) os << canon(t->subject);
    os << ";";
    if (t->payload.gen >= 0 || !t->payload.name.empty()) os << canon(t->payload);
    os << ";" << t->binder << ";" << t->label << ";" << t->def_name << ";" << t->run_level;
    for (const auto& a : t->args) os << "," << canon(a);
    for (const auto& [lbl, b] : t->branches) {
      os << "|" << lbl << ":";
      rt(b);
    }
    os << ";";
    rt(t->cont);
    os << ")";
  };
  for (int i : rp.nodes) {
    const Node& n = c.nodes[i];
    os << (n.kind == NodeKind::Msg ? "msg " : "proc ") << canon(n.offer) << "@" << n.running
       << " ";
    rt(n.term);
    os << "\n";
  }
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Split systems and the queue semantics
// ---------------------------------------------------------------------------

struct SplitSystem {
  Configuration env_c;  // provides delta, uses nothing
  Configuration d;      // the (mega)node under observation
  Configuration env_f;  // uses k; empty when internalized into d
  std::vector<ChanRef> delta;  // observable used interface of d
  std::vector<ChanRef> k;      // observable offered interface of d (0 or 1)
};

namespace detail {

// Splits a closed-on-the-left forest into its trees, each keyed by the root's
// offered channel.
inline std::map<ChanRef, std::vector<int>> forest_trees(const Configuration& c) {
  auto parent = parents(c);
  std::map<ChanRef, std::vector<int>> out;
  for (size_t i = 0; i < c.nodes.size(); ++i) {
    int r = int(i);
    int hops = 0;
    while (parent[r] >= 0 && hops++ < int(c.nodes.size())) r = parent[r];
    out[c.nodes[r].offer].push_back(int(i));
  }
  return out;
}

}  // namespace detail

// Internalizes non-observable trees of env_c (and env_f entirely, when the
// offered channel is not observable) into d, leaving observable interfaces.
inline SplitSystem split_interface(Configuration env_c, Configuration d,
                                   Configuration env_f, const std::string& xi) {
  SplitSystem out;
  auto trees = detail::forest_trees(env_c);
  std::set<int> moved;
  std::vector<Node> moved_nodes;
  for (const auto& ch : d.used) {
    if (observable(d, ch, xi)) {
      out.delta.push_back(ch);
      continue;
    }
    auto it = trees.find(ch);
    if (it == trees.end()) throw IllTyped("no closing tree roots " + to_string(ch));
    for (int i : it->second) {
      moved.insert(i);
      moved_nodes.push_back(env_c.nodes[i]);
    }
  }
  Configuration c2;
  c2.prog = env_c.prog;
  for (size_t i = 0; i < env_c.nodes.size(); ++i)
    if (!moved.count(int(i))) c2.nodes.push_back(env_c.nodes[i]);
  c2.chan_info = env_c.chan_info;
  c2.provided = out.delta;
  c2.next_fresh = env_c.next_fresh;

  Configuration d2;
  d2.prog = d.prog;
  d2.nodes = std::move(moved_nodes);
  for (auto& n : d.nodes) d2.nodes.push_back(std::move(n));
  d2.chan_info = d.chan_info;
  for (const auto& [ch, ci] : env_c.chan_info) d2.chan_info.emplace(ch, ci);
  d2.used = out.delta;
  d2.next_fresh = std::max(d.next_fresh, env_c.next_fresh);

  bool k_observable = !d.provided.empty() && observable(d, d.provided[0], xi);
  if (k_observable) {
    out.k = d.provided;
    d2.provided = d.provided;
    out.env_f = std::move(env_f);
  } else {
    for (auto& n : env_f.nodes) d2.nodes.push_back(std::move(n));
    for (const auto& [ch, ci] : env_f.chan_info) d2.chan_info.emplace(ch, ci);
    d2.provided = env_f.provided;  // the driver's own terminal channel
    out.env_f = Configuration{};
    out.env_f.prog = d.prog;
  }
  out.env_c = std::move(c2);
  out.d = std::move(d2);
  return out;
}

enum class EventKind { Label, CloseMsg, ChanSend, FwdBroadcast };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Label: return "label";
    case EventKind::CloseMsg: return "close";
    case EventKind::ChanSend: return "chan-send";
    case EventKind::FwdBroadcast: return "fwd";
  }
  return "?";
}

struct QueueEvent {
  bool incoming = false;  // overlined: sent from the closing side toward d
  ChanRef chan;
  EventKind kind{};
  std::string payload;

  bool operator==(const QueueEvent&) const = default;
};

using ObservableQueue = std::vector<QueueEvent>;

inline std::string to_string(const QueueEvent& e) {
  std::string s = e.incoming ? "in " : "out ";
  s += to_string(e.kind);
  s += " ";
  s += to_string(e.chan);
  if (!e.payload.empty()) s += " " + e.payload;
  return s;
}

struct QueueRunResult {
  ObservableQueue queue;
  bool completed = false;  // reached a single terminal close (or empty)
  std::vector<std::string> snapshots;  // relevant projection after each event
  Configuration final_config;
};

namespace detail {

constexpr int kOriginEnvC = 1;
constexpr int kOriginD = 2;
constexpr int kOriginEnvF = 3;

inline bool is_d_class(int origin) { return origin == kOriginD; }

inline Configuration assemble(const SplitSystem& s) {
  Configuration env_c = s.env_c;
  Configuration d = s.d;
  Configuration env_f = s.env_f;
  for (auto& n : env_c.nodes) n.origin = kOriginEnvC;
  for (auto& n : d.nodes) n.origin = kOriginD;
  for (auto& n : env_f.nodes) n.origin = kOriginEnvF;
  return compose({std::move(env_c), std::move(d), std::move(env_f)});
}

// The node whose receive/fwd this choice performs crosses the class boundary
// iff the matched message (or the fwd's consumer) lives on the other side.
inline std::optional<QueueEvent> boundary_event(const Configuration& c,
                                                const StepChoice& ch) {
  const Node& receiver = c.nodes[ch.node];
  auto msg_index = [&]() -> int {
    switch (ch.rule) {
      case RuleTag::OneRecv:
      case RuleTag::PlusRecv:
      case RuleTag::TensorRecv:
        for (size_t j = 0; j < c.nodes.size(); ++j)
          if (c.nodes[j].kind == NodeKind::Msg && c.nodes[j].offer == ch.subject &&
              is_positive_msg(c.nodes[j]))
            return int(j);
        return -1;
      case RuleTag::WithRecv:
      case RuleTag::LolliRecv:
        for (size_t j = 0; j < c.nodes.size(); ++j)
          if (c.nodes[j].kind == NodeKind::Msg && c.nodes[j].term->subject == ch.subject &&
              c.nodes[j].offer != ch.subject)
            return int(j);
        return -1;
      default:
        return -1;
    }
  }();
  if (ch.rule == RuleTag::Fwd) {
    // Broadcast of the forwarded name across the boundary, if any.
    for (size_t j = 0; j < c.nodes.size(); ++j) {
      if (int(j) == ch.node) continue;
      auto uses = node_uses(c.nodes[j]);
      if (std::find(uses.begin(), uses.end(), receiver.offer) != uses.end()) {
        if (is_d_class(c.nodes[j].origin) == is_d_class(receiver.origin)) return {};
        QueueEvent e;
        e.incoming = !is_d_class(receiver.origin);
        e.chan = receiver.offer;
        e.kind = EventKind::FwdBroadcast;
        e.payload = to_string(receiver.term->payload);
        return e;
      }
    }
    return {};
  }
  if (msg_index < 0) return {};
  const Node& msg = c.nodes[msg_index];
  if (is_d_class(msg.origin) == is_d_class(receiver.origin)) return {};
  QueueEvent e;
  e.incoming = !is_d_class(msg.origin);
  e.chan = msg.term->subject;
  switch (msg.term->kind) {
    case TermKind::Close: e.kind = EventKind::CloseMsg; break;
    case TermKind::SendLabel:
      e.kind = EventKind::Label;
      e.payload = msg.term->label;
      break;
    case TermKind::SendChan:
      e.kind = EventKind::ChanSend;
      e.payload = to_string(msg.term->payload);
      break;
    default: break;
  }
  return e;
}

inline RelevantProjection d_side_projection(const Configuration& c, const std::string& xi,
                                            Configuration* scratch) {
  // Relevancy of the d-class nodes, seeded by the channels shared with the
  // closing side.
  Configuration& d = *scratch;
  d = Configuration{};
  d.prog = c.prog;
  d.chan_info = c.chan_info;
  std::set<ChanRef> d_provides, d_uses, env_provides, env_uses;
  for (const auto& n : c.nodes) {
    auto& prov = is_d_class(n.origin) ? d_provides : env_provides;
    auto& uses = is_d_class(n.origin) ? d_uses : env_uses;
    prov.insert(n.offer);
    for (const auto& u : node_uses(n)) uses.insert(u);
    if (is_d_class(n.origin)) d.nodes.push_back(n);
  }
  std::vector<ChanRef> boundary;
  for (const auto& ch : d_provides)
    if (env_uses.count(ch)) boundary.push_back(ch);
  for (const auto& ch : d_uses)
    if (env_provides.count(ch)) boundary.push_back(ch);
  return relevant_projection(d, boundary, xi);
}

}  // namespace detail

// Runs the split system, alternating internal runs with boundary transfers,
// and records every message that crosses between the partial program and its
// closing configurations.
inline QueueRunResult run_queues(const SplitSystem& s, const std::string& xi,
                                 Scheduler sched = Scheduler::leftmost(),
                                 long budget = kDefaultStepBudget,
                                 bool capture_snapshots = false) {
  using namespace detail;
  (void)sched;  // boundary alternation fixes the strategy; internal runs are leftmost
  Configuration c = assemble(s);
  QueueRunResult out;
  Configuration scratch;
  for (;;) {
    if (budget-- <= 0) throw StepBudgetExceeded("queue step budget exceeded");
    auto en = enabled(c);
    if (en.empty()) break;
    // Internal steps first: the three parts run to poised between transfers.
    std::optional<StepChoice> internal;
    std::optional<std::pair<StepChoice, QueueEvent>> boundary;
    for (const auto& ch : en) {
      auto ev = boundary_event(c, ch);
      if (!ev && !internal) internal = ch;
      if (ev && !boundary) boundary = {ch, *ev};
      if (internal) break;
    }
    if (internal) {
      c = step(std::move(c), *internal);
      continue;
    }
    out.queue.push_back(boundary->second);
    c = step(std::move(c), boundary->first);
    if (capture_snapshots)
      out.snapshots.push_back(render_projection(c, d_side_projection(c, xi, &scratch), xi));
  }
  out.completed = c.nodes.empty() ||
                  (c.nodes.size() == 1 && c.nodes[0].kind == NodeKind::Msg &&
                   c.nodes[0].term->kind == TermKind::Close);
  out.final_config = std::move(c);
  return out;
}

// Route-1 cross-check for the queue semantics: run the plain composite under
// the ordinary scheduler and log receives whose message crosses the class
// boundary.
inline QueueRunResult composite_boundary_events(const SplitSystem& s,
                                                Scheduler sched = Scheduler::leftmost(),
                                                long budget = kDefaultStepBudget) {
  using namespace detail;
  Configuration c = assemble(s);
  QueueRunResult out;
  std::mt19937_64 rng(sched.seed);
  for (;;) {
    if (budget-- <= 0) throw StepBudgetExceeded("step budget exceeded");
    auto en = enabled(c);
    if (en.empty()) break;
    size_t pick = 0;
    switch (sched.kind) {
      case Scheduler::Kind::Leftmost: pick = 0; break;
      case Scheduler::Kind::Rightmost: pick = en.size() - 1; break;
      case Scheduler::Kind::Random:
        pick = std::uniform_int_distribution<size_t>(0, en.size() - 1)(rng);
        break;
    }
    if (auto ev = boundary_event(c, en[pick])) out.queue.push_back(*ev);
    c = step(std::move(c), en[pick]);
  }
  out.completed = c.nodes.empty() ||
                  (c.nodes.size() == 1 && c.nodes[0].kind == NodeKind::Msg &&
                   c.nodes[0].term->kind == TermKind::Close);
  out.final_config = std::move(c);
  return out;
}

// ---------------------------------------------------------------------------
// Queue equivalence
// ---------------------------------------------------------------------------

enum class QueueVerdict { Equivalent, EquivalentInputsDiverged, Inequivalent };

struct QueueEquivResult {
  QueueVerdict verdict = QueueVerdict::Equivalent;
  int divergence_index = -1;

  bool equivalent() const { return verdict != QueueVerdict::Inequivalent; }
};

// ⩭: outgoing heads must match and recurse; a mismatch on incoming heads
// discharges the rest of the obligation.
inline QueueEquivResult queue_equiv(const ObservableQueue& q1, const ObservableQueue& q2) {
  size_t i = 0;
  for (;; ++i) {
    if (i == q1.size() && i == q2.size()) return {QueueVerdict::Equivalent, -1};
    if (i == q1.size() || i == q2.size())
      return {QueueVerdict::Inequivalent, int(i)};
    const QueueEvent& a = q1[i];
    const QueueEvent& b = q2[i];
    if (a.incoming != b.incoming) return {QueueVerdict::Inequivalent, int(i)};
    if (a == b) continue;
    if (a.incoming) return {QueueVerdict::EquivalentInputsDiverged, int(i)};
    return {QueueVerdict::Inequivalent, int(i)};
  }
}

// ---------------------------------------------------------------------------
// Canonical closing environments
// ---------------------------------------------------------------------------

// A script fixes every label choice the environment makes while following a
// session type; receives continue uniformly per distinct continuation type.
struct Script {
  enum class Kind { Unit, Choose, Recv, Pair } kind = Kind::Unit;
  std::string label;             // Choose
  std::vector<Script> children;  // Choose: 1, Recv: per distinct type, Pair: 2

  std::string key() const {
    switch (kind) {
      case Kind::Unit: return "u";
      case Kind::Choose: return "c(" + label + children[0].key() + ")";
      case Kind::Recv: {
        std::string s = "r(";
        for (const auto& ch : children) s += ch.key();
        return s + ")";
      }
      case Kind::Pair: return "p(" + children[0].key() + children[1].key() + ")";
    }
    return "?";
  }
};

namespace detail {

inline std::vector<TypeRef> distinct_branch_types(const TypeRef& t) {
  std::vector<TypeRef> out;
  for (const auto& [_, bt] : t->branches) {
    bool seen = false;
    for (const auto& d : out) seen = seen || type_equal(d, bt);
    if (!seen) out.push_back(bt);
  }
  return out;
}

inline std::vector<Script> product_scripts(Script::Kind kind,
                                           const std::vector<std::vector<Script>>& parts) {
  std::vector<Script> out;
  std::vector<size_t> idx(parts.size(), 0);
  for (;;) {
    Script s;
    s.kind = kind;
    for (size_t i = 0; i < parts.size(); ++i) s.children.push_back(parts[i][idx[i]]);
    out.push_back(std::move(s));
    size_t i = 0;
    while (i < parts.size() && ++idx[i] == parts[i].size()) idx[i++] = 0;
    if (i == parts.size()) break;
  }
  return out;
}

}  // namespace detail

// All label behaviors of a canonical environment at this type: `providing`
// follows the provider role, otherwise the client role.
inline std::vector<Script> enumerate_scripts(const TypeRef& t, bool providing) {
  using detail::distinct_branch_types;
  using detail::product_scripts;
  switch (t->kind) {
    case TypeKind::One:
      return {Script{}};
    case TypeKind::Internal:
    case TypeKind::External: {
      bool env_chooses = (t->kind == TypeKind::Internal) == providing;
      if (env_chooses) {
        std::vector<Script> out;
        for (const auto& [lbl, bt] : t->branches) {
          for (const auto& s : enumerate_scripts(bt, providing)) {
            Script c;
            c.kind = Script::Kind::Choose;
            c.label = lbl;
            c.children.push_back(s);
            out.push_back(std::move(c));
          }
        }
        return out;
      }
      std::vector<std::vector<Script>> parts;
      for (const auto& bt : distinct_branch_types(t))
        parts.push_back(enumerate_scripts(bt, providing));
      return product_scripts(Script::Kind::Recv, parts);
    }
    case TypeKind::Tensor: {
      // Provider sends the payload (provides it); client receives and
      // consumes it.
      std::vector<std::vector<Script>> parts{
          enumerate_scripts(t->payload, providing),
          enumerate_scripts(t->cont, providing)};
      return product_scripts(Script::Kind::Pair, parts);
    }
    case TypeKind::Lolli: {
      // Provider receives the payload and becomes its client; a client must
      // supply (provide) the payload.
      std::vector<std::vector<Script>> parts{
          enumerate_scripts(t->payload, !providing),
          enumerate_scripts(t->cont, providing)};
      return product_scripts(Script::Kind::Pair, parts);
    }
    case TypeKind::Named:
      throw IllTyped("enumerate_scripts requires expanded types");
  }
  return {};
}

// ---------------------------------------------------------------------------
// Canonical closing environments as synthesized definitions
// ---------------------------------------------------------------------------

// Canonical inhabitants are materialized as process definitions appended to a
// copy of the program, so higher-order payloads are spawned linearly inside
// the branch that sends them.
class ClosingSynth {
public:
  explicit ClosingSynth(const Program& base) : ext_(std::make_shared<Program>(base)) {}

  // Definition offering (c : type[sec]) that behaves per the script.
  std::string provider_def(const TypeRef& type, const std::string& sec, const Script& s) {
    std::string key = "P|" + pretty_type(type) + "|" + sec + "|" + s.key();
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    std::string name = "Env$" + std::to_string(counter_++);
    cache_[key] = name;
    int binders = 0;
    ProcessDef def;
    def.name = name;
    def.offers = {"c", type, sec, {}};
    def.run_level = sec;
    def.body = provide_term({"c", -1}, type, sec, s, binders);
    ext_->defs.push_back(std::move(def));
    return name;
  }

  // Definition using (x : ktype[ksec]) and offering a terminal channel.
  std::string driver_def(const TypeRef& ktype, const std::string& ksec, const Script& s) {
    std::string key = "D|" + pretty_type(ktype) + "|" + ksec + "|" + s.key();
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    std::string name = "Drv$" + std::to_string(counter_++);
    cache_[key] = name;
    int binders = 0;
    ProcessDef def;
    def.name = name;
    def.uses = {{"x", ktype, ksec, {}}};
    def.offers = {"root", t_one(), ksec, {}};
    def.run_level = ksec;
    TermRef done =
        mk_term({TermKind::Close, {}, {"root", -1}, {}, "", "", {}, "", {}, "", nullptr});
    def.body = consume_term({"x", -1}, ktype, ksec, s, std::move(done), binders);
    ext_->defs.push_back(std::move(def));
    return name;
  }

  // Every synthesized definition must itself type-check.
  void verify() {
    for (const auto& def : ext_->defs) {
      if (def.name.rfind("Env$", 0) != 0 && def.name.rfind("Drv$", 0) != 0) continue;
      if (auto e = check_signature(*ext_, def))
        throw ClosingIllTyped("synthesized closing '" + def.name +
                              "' is ill-typed: " + e->constraint);
    }
  }

  std::shared_ptr<const Program> program() const { return ext_; }

private:
  TermRef provide_term(const ChanRef& c, const TypeRef& type, const std::string& sec,
                       const Script& s, int& binders) {
    switch (type->kind) {
      case TypeKind::One:
        return mk_term({TermKind::Close, {}, c, {}, "", "", {}, "", {}, "", nullptr});
      case TypeKind::Internal: {
        TypeRef bt;
        for (const auto& [lbl, b] : type->branches)
          if (lbl == s.label) bt = b;
        return mk_term({TermKind::SendLabel, {}, c, {}, "", s.label, {}, "", {}, "",
                        provide_term(c, bt, sec, s.children[0], binders)});
      }
      case TypeKind::External: {
        std::vector<std::pair<std::string, TermRef>> branches;
        for (const auto& [lbl, bt] : type->branches)
          branches.emplace_back(lbl,
                                provide_term(c, bt, sec, arm_for(s, type, bt), binders));
        return mk_term(
            {TermKind::Case, {}, c, {}, "", "", std::move(branches), "", {}, "", nullptr});
      }
      case TypeKind::Tensor: {
        std::string callee = provider_def(type->payload, sec, s.children[0]);
        std::string p = "p$" + std::to_string(binders++);
        TermRef send = mk_term({TermKind::SendChan, {}, c, {p, -1}, "", "", {}, "", {}, "",
                                provide_term(c, type->cont, sec, s.children[1], binders)});
        return mk_term({TermKind::Spawn, {}, {}, {}, p, "", {}, callee, {}, sec,
                        std::move(send)});
      }
      case TypeKind::Lolli: {
        std::string w = "w$" + std::to_string(binders++);
        TermRef after = provide_term(c, type->cont, sec, s.children[1], binders);
        TermRef body =
            consume_term({w, -1}, type->payload, sec, s.children[0], std::move(after),
                         binders);
        return mk_term(
            {TermKind::RecvChan, {}, c, {}, w, "", {}, "", {}, "", std::move(body)});
      }
      case TypeKind::Named:
        throw IllTyped("closing generation requires expanded types");
    }
    return nullptr;
  }

  TermRef consume_term(const ChanRef& x, const TypeRef& type, const std::string& sec,
                       const Script& s, TermRef cont, int& binders) {
    switch (type->kind) {
      case TypeKind::One:
        return mk_term({TermKind::Wait, {}, x, {}, "", "", {}, "", {}, "", std::move(cont)});
      case TypeKind::Internal: {
        std::vector<std::pair<std::string, TermRef>> branches;
        for (const auto& [lbl, bt] : type->branches)
          branches.emplace_back(lbl, consume_term(x, bt, sec, arm_for(s, type, bt), cont,
                                                  binders));
        return mk_term(
            {TermKind::Case, {}, x, {}, "", "", std::move(branches), "", {}, "", nullptr});
      }
      case TypeKind::External: {
        TypeRef bt;
        for (const auto& [lbl, b] : type->branches)
          if (lbl == s.label) bt = b;
        return mk_term({TermKind::SendLabel, {}, x, {}, "", s.label, {}, "", {}, "",
                        consume_term(x, bt, sec, s.children[0], std::move(cont), binders)});
      }
      case TypeKind::Tensor: {
        std::string v = "v$" + std::to_string(binders++);
        TermRef inner = consume_term(x, type->cont, sec, s.children[1], std::move(cont),
                                     binders);
        TermRef body = consume_term({v, -1}, type->payload, sec, s.children[0],
                                    std::move(inner), binders);
        return mk_term(
            {TermKind::RecvChan, {}, x, {}, v, "", {}, "", {}, "", std::move(body)});
      }
      case TypeKind::Lolli: {
        std::string callee = provider_def(type->payload, sec, s.children[0]);
        std::string p = "p$" + std::to_string(binders++);
        TermRef send =
            mk_term({TermKind::SendChan, {}, x, {p, -1}, "", "", {}, "", {}, "",
                     consume_term(x, type->cont, sec, s.children[1], std::move(cont),
                                  binders)});
        return mk_term({TermKind::Spawn, {}, {}, {}, p, "", {}, callee, {}, sec,
                        std::move(send)});
      }
      case TypeKind::Named:
        throw IllTyped("closing generation requires expanded types");
    }
    return nullptr;
  }

  static const Script& arm_for(const Script& s, const TypeRef& choice, const TypeRef& br) {
    auto distinct = detail::distinct_branch_types(choice);
    for (size_t i = 0; i < distinct.size(); ++i)
      if (type_equal(distinct[i], br)) return s.children[i];
    throw IllTyped("script arm missing");
  }

  std::shared_ptr<Program> ext_;
  std::map<std::string, std::string> cache_;
  int counter_ = 0;
};

// ---------------------------------------------------------------------------
// The noninterference harness
// ---------------------------------------------------------------------------

struct ClosingBehavior {
  std::vector<Script> providers;  // one per used interface channel
  Script driver;                  // for the offered channel
  std::string obs_key;            // serialization of the observable parts
};

struct NiCounterexample {
  int first = 0;
  int second = 0;
  ObservableQueue q1, q2;
  int divergence_index = -1;
};

struct NiReport {
  int closings = 0;
  long pairs = 0;
  long equivalent = 0;
  long inputs_diverged = 0;  // equivalent, but only because inputs diverged
  long inequivalent = 0;
  std::optional<NiCounterexample> counterexample;
  bool relevant_invariant_checked = false;
  bool relevant_invariant_ok = true;
  std::vector<ObservableQueue> queues;  // per closing

  bool all_equivalent() const { return inequivalent == 0; }
};

struct NiOptions {
  bool unsafe = false;
  Scheduler scheduler = Scheduler::leftmost();
  long budget = kDefaultStepBudget;
  bool check_relevant_invariant = true;
  long max_closings = 100000;
};

// Enumerates every closing-label behavior for the booted entry's interface.
inline std::vector<ClosingBehavior> enumerate_closings(const Configuration& d,
                                                       const std::string& xi,
                                                       long max_closings = 100000) {
  std::vector<std::vector<Script>> per_chan;
  for (const auto& ch : d.used)
    per_chan.push_back(enumerate_scripts(d.chan_info.at(ch).type, /*providing=*/true));
  std::vector<Script> drivers{Script{}};
  if (!d.provided.empty())
    drivers = enumerate_scripts(d.chan_info.at(d.provided[0]).type, /*providing=*/false);

  long total = drivers.size();
  for (const auto& v : per_chan) total *= long(v.size());
  if (total > max_closings)
    throw RuntimeError("closing enumeration too large: " + std::to_string(total));

  std::vector<ClosingBehavior> out;
  std::vector<size_t> idx(per_chan.size(), 0);
  for (size_t di = 0; di < drivers.size(); ++di) {
    std::fill(idx.begin(), idx.end(), 0);
    for (;;) {
      ClosingBehavior cb;
      for (size_t i = 0; i < per_chan.size(); ++i) cb.providers.push_back(per_chan[i][idx[i]]);
      cb.driver = drivers[di];
      std::string key;
      for (size_t i = 0; i < d.used.size(); ++i)
        if (observable(d, d.used[i], xi)) key += to_string(d.used[i]) + "=" +
                                                 cb.providers[i].key() + ";";
      if (!d.provided.empty() && observable(d, d.provided[0], xi))
        key += "K=" + cb.driver.key() + ";";
      cb.obs_key = std::move(key);
      out.push_back(std::move(cb));
      size_t i = 0;
      while (i < idx.size() && ++idx[i] == per_chan[i].size()) idx[i++] = 0;
      if (idx.empty() || i == idx.size()) break;
    }
  }
  return out;
}

// All closing behaviors of an entry, realized as synthesized definitions in
// an extended program.
struct ClosingSet {
  std::shared_ptr<const Program> ext;
  Configuration d;  // re-booted against the extended program
  std::vector<ClosingBehavior> behaviors;
  std::vector<std::vector<std::string>> provider_defs;  // per behavior, per Δ entry
  std::vector<std::string> driver_defs;                 // per behavior; "" when closed
};

inline ClosingSet build_closings(std::shared_ptr<const Program> prog,
                                 const std::string& entry, const std::string& xi,
                                 bool unsafe, long max_closings = 100000) {
  Configuration d0 = boot(prog, entry, /*enforce_typing=*/!unsafe);
  ClosingSynth synth(*prog);

  ClosingSet out;
  out.behaviors = enumerate_closings(d0, xi, max_closings);
  for (const auto& cb : out.behaviors) {
    std::vector<std::string> defs;
    for (size_t i = 0; i < d0.used.size(); ++i) {
      const auto& info = d0.chan_info.at(d0.used[i]);
      defs.push_back(synth.provider_def(info.type, info.sec, cb.providers[i]));
    }
    out.provider_defs.push_back(std::move(defs));
    if (!d0.provided.empty()) {
      const auto& info = d0.chan_info.at(d0.provided[0]);
      out.driver_defs.push_back(synth.driver_def(info.type, info.sec, cb.driver));
    } else {
      out.driver_defs.push_back("");
    }
  }
  synth.verify();
  out.ext = synth.program();
  out.d = boot(out.ext, entry, /*enforce_typing=*/!unsafe);
  return out;
}

// Builds the split system realizing one enumerated closing behavior.
inline SplitSystem make_split(const ClosingSet& cs, size_t idx, const std::string& xi) {
  const Configuration& d = cs.d;
  std::vector<Configuration> providers;
  for (size_t i = 0; i < d.used.size(); ++i) {
    Configuration p = boot(cs.ext, cs.provider_defs[idx][i]);
    providers.push_back(rename_base(std::move(p), "c", d.used[i].name));
  }
  Configuration env_c = compose(std::move(providers));
  if (!env_c.prog) env_c.prog = cs.ext;
  env_c.chan_info.insert(d.chan_info.begin(), d.chan_info.end());

  Configuration env_f;
  env_f.prog = cs.ext;
  if (!d.provided.empty()) {
    env_f = rename_base(boot(cs.ext, cs.driver_defs[idx]), "x", d.provided[0].name);
    env_f.chan_info.insert(d.chan_info.begin(), d.chan_info.end());
  }
  return split_interface(std::move(env_c), Configuration(d), std::move(env_f), xi);
}

// Compares one explicit pair of closings; the env-pairs mode of the checker.
inline QueueEquivResult compare_closing_pair(const ClosingSet& cs, size_t i, size_t j,
                                             const std::string& xi,
                                             const NiOptions& opts = {}) {
  auto r1 = run_queues(make_split(cs, i, xi), xi, opts.scheduler, opts.budget);
  auto r2 = run_queues(make_split(cs, j, xi), xi, opts.scheduler, opts.budget);
  return queue_equiv(r1.queue, r2.queue);
}

// Exhaustive noninterference check at observer level ξ.
inline NiReport ni_check(std::shared_ptr<const Program> prog, const std::string& entry,
                         const std::string& xi, NiOptions opts = {}) {
  if (!prog->lattice.has_level(xi)) throw UnknownLevel("unknown level '" + xi + "'");

  NiReport rep;
  ClosingSet cs = build_closings(prog, entry, xi, opts.unsafe, opts.max_closings);
  const auto& closings = cs.behaviors;
  rep.closings = int(closings.size());

  std::vector<QueueRunResult> runs;
  runs.reserve(closings.size());
  for (size_t i = 0; i < closings.size(); ++i) {
    SplitSystem s = make_split(cs, i, xi);
    runs.push_back(run_queues(s, xi, opts.scheduler, opts.budget,
                              opts.check_relevant_invariant));
    rep.queues.push_back(runs.back().queue);
  }

  rep.relevant_invariant_checked = opts.check_relevant_invariant;
  for (size_t i = 0; i < closings.size(); ++i) {
    for (size_t j = i; j < closings.size(); ++j) {
      if (closings[i].obs_key != closings[j].obs_key) continue;
      ++rep.pairs;
      auto res = queue_equiv(runs[i].queue, runs[j].queue);
      switch (res.verdict) {
        case QueueVerdict::Equivalent: ++rep.equivalent; break;
        case QueueVerdict::EquivalentInputsDiverged:
          ++rep.equivalent;
          ++rep.inputs_diverged;
          break;
        case QueueVerdict::Inequivalent:
          ++rep.inequivalent;
          if (!rep.counterexample)
            rep.counterexample = NiCounterexample{int(i), int(j), runs[i].queue,
                                                  runs[j].queue, res.divergence_index};
          break;
      }
      if (opts.check_relevant_invariant && res.verdict != QueueVerdict::Inequivalent) {
        // Lemma-3 shadow: while the boundary events agree, the relevant
        // projections of the two partial programs stay equal.
        size_t upto = res.divergence_index < 0
                          ? std::min(runs[i].snapshots.size(), runs[j].snapshots.size())
                          : size_t(res.divergence_index);
        for (size_t k = 0; k < upto; ++k) {
          if (runs[i].snapshots[k] != runs[j].snapshots[k]) {
            rep.relevant_invariant_ok = false;
            break;
          }
        }
      }
    }
  }
  return rep;
}

}  // namespace sillsec

#endif
