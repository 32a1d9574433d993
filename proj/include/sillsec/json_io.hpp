#ifndef SILLSEC_JSON_IO_HPP
#define SILLSEC_JSON_IO_HPP

#include <json.hpp>

#include "sillsec/corpus.hpp"
#include "sillsec/security.hpp"
#include "sillsec/typecheck.hpp"

namespace sillsec {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

inline ordered_json to_json(const TypeError& e) {
  return ordered_json{{"kind", to_string(e.kind)},
                      {"line", e.span.line},
                      {"col", e.span.col},
                      {"constraint", e.constraint}};
}

inline ordered_json report_json(const std::vector<DefReport>& report) {
  ordered_json defs = ordered_json::array();
  for (const auto& r : report) {
    ordered_json d{{"def", r.def}, {"status", r.error ? "rejected" : "accepted"}};
    if (r.error) d["error"] = to_json(*r.error);
    defs.push_back(std::move(d));
  }
  return ordered_json{{"schema", kSchemaVersion}, {"report", std::move(defs)}};
}

inline ordered_json to_json(const StepRecord& r) {
  ordered_json j{{"step", r.step},
                 {"rule", to_string(r.rule)},
                 {"node", r.node},
                 {"chan", r.chan.name},
                 {"gen", r.chan.gen}};
  if (!r.payload.empty()) j["payload"] = r.payload;
  return j;
}

inline ordered_json to_json(const QueueEvent& e) {
  return ordered_json{{"dir", e.incoming ? "in" : "out"},
                      {"chan", e.chan.name},
                      {"gen", e.chan.gen},
                      {"kind", to_string(e.kind)},
                      {"payload", e.payload}};
}

inline ordered_json queue_json(const ObservableQueue& q) {
  ordered_json out = ordered_json::array();
  for (const auto& e : q) out.push_back(to_json(e));
  return out;
}

inline ordered_json verdict_json(const NiReport& rep) {
  ordered_json j{{"schema", kSchemaVersion},
                 {"closings", rep.closings},
                 {"pairs", rep.pairs},
                 {"equivalent", rep.equivalent},
                 {"inputs_diverged", rep.inputs_diverged},
                 {"inequivalent", rep.inequivalent},
                 {"verdict", rep.all_equivalent() ? "equivalent" : "inequivalent"}};
  if (rep.relevant_invariant_checked)
    j["relevant_projection_invariant"] = rep.relevant_invariant_ok;
  if (rep.counterexample) {
    const auto& cx = *rep.counterexample;
    j["counterexample"] = ordered_json{{"pair", ordered_json::array({cx.first, cx.second})},
                                       {"q1", queue_json(cx.q1)},
                                       {"q2", queue_json(cx.q2)},
                                       {"divergence_index", cx.divergence_index}};
  }
  return j;
}

inline ordered_json corpus_json(const std::vector<corpus::Fixture>& fixtures, int ntok) {
  ordered_json fx = ordered_json::array();
  for (const auto& f : fixtures) {
    ordered_json defs = ordered_json::array();
    for (const auto& e : f.expects) {
      ordered_json d{{"def", e.def}, {"status", e.accepts ? "accepts" : "rejects"}};
      if (!e.accepts) {
        d["line"] = e.span.line;
        d["col"] = e.span.col;
        d["kind"] = e.kind;
        d["constraint"] = e.constraint;
      }
      defs.push_back(std::move(d));
    }
    ordered_json ni = ordered_json::array();
    for (const auto& n : f.ni)
      ni.push_back(ordered_json{{"entry", n.entry},
                                {"observer", n.observer},
                                {"equivalent", n.equivalent},
                                {"unsafe", n.unsafe}});
    ordered_json item{{"file", f.filename}, {"defs", std::move(defs)}};
    if (!ni.empty()) item["ni"] = std::move(ni);
    fx.push_back(std::move(item));
  }
  return ordered_json{{"schema", kSchemaVersion}, {"ntok", ntok}, {"fixtures", std::move(fx)}};
}

}  // namespace sillsec

#endif
