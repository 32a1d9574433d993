#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "runtime_fixtures.hpp"
#include "sillsec/runtime.hpp"

using namespace sillsec;

TEST_CASE("boot instantiates the signature at generation 0") {
  auto prog = fixtures::bank_program();
  Configuration c = boot(prog, "Bank");
  REQUIRE(c.nodes.size() == 1);
  CHECK(c.nodes[0].kind == NodeKind::Proc);
  CHECK(c.nodes[0].offer == ChanRef{"z", 0});
  CHECK(c.nodes[0].running == "guest");
  CHECK(c.provided == std::vector<ChanRef>{{"z", 0}});
  std::vector<ChanRef> want{{"x", 0}, {"x'", 0}, {"y", 0}, {"y'", 0}, {"u", 0}};
  CHECK(c.used == want);
  CHECK(c.chan_info.at({"x", 0}).sec == "alice");
  CHECK(c.chan_info.at({"u", 0}).sec == "guest");
  CHECK(c.chan_info.at({"x", 0}).type->kind == TypeKind::External);

  Configuration acc = boot(prog, "aAcc");
  CHECK(acc.used.empty());

  CHECK_THROWS_AS(boot(prog, "NoSuch"), UnknownProcess);

  auto leaky = fixtures::load_shared(corpus::leaky_bank_source());
  CHECK_THROWS_AS(boot(leaky, "LeakyBank"), IllTyped);
  CHECK_NOTHROW(boot(leaky, "LeakyBank", /*enforce_typing=*/false));
}

TEST_CASE("enabled finds the only redex in the composed bank stack") {
  auto prog = fixtures::bank_program();
  Configuration c = fixtures::bank_composite(prog);
  REQUIRE(c.nodes.size() == 8);
  CHECK(c.provided == std::vector<ChanRef>{{"z", 0}});
  CHECK(c.used.empty());
  auto en = enabled(c);
  REQUIRE(en.size() == 1);
  CHECK(en[0].rule == RuleTag::LolliSend);
  CHECK(en[0].subject == ChanRef{"y", 0});
  CHECK(c.nodes[en[0].node].term->payload == ChanRef{"x", 0});
}

TEST_CASE("close on a singleton proc becomes a message") {
  auto prog = fixtures::load_shared(
      "lattice { levels g; }\nproc P [g] () :: (y: 1) @ g = { close y }\n");
  Configuration c = boot(prog, "P");
  auto en = enabled(c);
  REQUIRE(en.size() == 1);
  CHECK(en[0] == StepChoice{0, RuleTag::OneSend, {"y", 0}});
  Configuration c2 = step(c, en[0]);
  REQUIRE(c2.nodes.size() == 1);
  CHECK(c2.nodes[0].kind == NodeKind::Msg);
  CHECK(c2.nodes[0].term->kind == TermKind::Close);
  CHECK(is_poised(c2));
  CHECK(enabled(c2).empty());
  CHECK_THROWS_AS(step(c2, en[0]), NotEnabled);
}

TEST_CASE("internal choice send and receive, hand-derived") {
  auto prog = fixtures::load_shared(fixtures::kPlusFixture);
  Configuration c = compose({boot(prog, "P"), boot(prog, "Q")});
  CHECK(!is_poised(c));  // a matched pair exists after the send

  auto en = enabled(c);
  REQUIRE(en.size() == 1);
  CHECK(en[0].rule == RuleTag::PlusSend);
  Configuration c1 = step(c, en[0]);
  REQUIRE(c1.nodes.size() == 3);
  CHECK(c1.nodes[0].kind == NodeKind::Proc);
  CHECK(c1.nodes[0].offer == ChanRef{"w", 1});  // bumped generation
  CHECK(c1.nodes[0].term->kind == TermKind::Close);
  CHECK(c1.nodes[1].kind == NodeKind::Msg);
  CHECK(c1.nodes[1].offer == ChanRef{"w", 0});
  CHECK(c1.nodes[1].term->label == "a");
  CHECK(c1.nodes[1].term->cont->kind == TermKind::Fwd);
  CHECK(c1.chan_info.at({"w", 1}).type->kind == TypeKind::One);

  auto en1 = enabled(c1);
  // The sender's close and the receiver's case are both ready.
  REQUIRE(en1.size() == 2);
  CHECK(en1[0].rule == RuleTag::OneSend);
  CHECK(en1[1].rule == RuleTag::PlusRecv);

  Configuration c2 = step(c1, en1[1]);
  REQUIRE(c2.nodes.size() == 2);
  const Node& q = c2.nodes[1];
  CHECK(q.term->kind == TermKind::Wait);
  CHECK(q.term->subject == ChanRef{"w", 1});  // substituted new generation
  CHECK(q.running == "alice");                // guest ⊔ alice
}

TEST_CASE("external choice send and receive, hand-derived") {
  auto prog = fixtures::load_shared(fixtures::kWithFixture);
  Configuration c = compose({boot(prog, "R"), boot(prog, "U")});
  auto en = enabled(c);
  REQUIRE(en.size() == 1);
  CHECK(en[0].rule == RuleTag::WithSend);
  Configuration c1 = step(c, en[0]);
  REQUIRE(c1.nodes.size() == 3);
  // Message sits left of the sender.
  CHECK(c1.nodes[0].term->kind == TermKind::Case);  // provider R
  CHECK(c1.nodes[1].kind == NodeKind::Msg);
  CHECK(c1.nodes[1].offer == ChanRef{"w", 1});
  CHECK(c1.nodes[1].term->subject == ChanRef{"w", 0});
  CHECK(c1.nodes[2].term->kind == TermKind::Wait);

  auto en1 = enabled(c1);
  REQUIRE(en1.size() == 1);
  CHECK(en1[0].rule == RuleTag::WithRecv);
  Configuration c2 = step(c1, en1[0]);
  REQUIRE(c2.nodes.size() == 2);
  const Node& r = c2.nodes[0];
  CHECK(r.offer == ChanRef{"w", 1});  // provider moves to the new generation
  CHECK(r.term->kind == TermKind::Close);
  CHECK(r.running == "alice");  // set to the carrier secrecy
}

TEST_CASE("tensor handoff substitutes payload and generation") {
  auto prog = fixtures::load_shared(fixtures::kTensorFixture);
  auto inner = boot(prog, "Inner");
  auto snd = boot(prog, "Snd");
  auto rcv = boot(prog, "Rcv");
  Configuration c0 = compose({std::move(inner), std::move(snd), std::move(rcv)});
  auto en = enabled(c0);
  REQUIRE(en.size() == 2);  // Inner's close and Snd's tensor send
  CHECK(en[0].rule == RuleTag::OneSend);
  CHECK(en[1].rule == RuleTag::TensorSend);
  Configuration c1 = step(c0, en[1]);
  const Node& msg = c1.nodes[2];
  REQUIRE(msg.kind == NodeKind::Msg);
  CHECK(msg.offer == ChanRef{"w", 0});
  CHECK(msg.term->kind == TermKind::SendChan);
  CHECK(msg.term->payload == ChanRef{"p", 0});

  auto en1 = enabled(c1);
  // Inner's close, the sender's continuation close, and the receive.
  REQUIRE(en1.size() == 3);
  CHECK(en1[2].rule == RuleTag::TensorRecv);
  Configuration c2 = step(c1, en1[2]);
  const Node& rnode = c2.nodes.back();
  CHECK(rnode.running == "alice");  // raised to carrier secrecy
  CHECK(rnode.term->subject == ChanRef{"p", 0});  // binder v := p@0
  CHECK(rnode.term->cont->subject == ChanRef{"w", 1});
}

TEST_CASE("forward substitutes and is disabled at the interface") {
  auto prog = fixtures::load_shared(fixtures::kFwdFixture);
  SUBCASE("at the interface the forward does not fire") {
    Configuration c = compose({boot(prog, "A"), boot(prog, "Fw")});
    for (const auto& ch : enabled(c)) CHECK(ch.rule != RuleTag::Fwd);
  }
  SUBCASE("internally it substitutes both sides") {
    Configuration c = compose({boot(prog, "A"), boot(prog, "Fw"), boot(prog, "W")});
    auto en = enabled(c);
    StepChoice fwd{};
    bool found = false;
    for (const auto& ch : en)
      if (ch.rule == RuleTag::Fwd) {
        fwd = ch;
        found = true;
      }
    REQUIRE(found);
    Configuration c1 = step(c, fwd);
    REQUIRE(c1.nodes.size() == 2);
    CHECK(c1.nodes[1].term->subject == ChanRef{"x", 0});  // waiter re-pointed
    RunResult done = run_to_poised(c1);
    REQUIRE(done.config.nodes.size() == 1);
    CHECK(done.config.nodes[0].term->kind == TermKind::Close);
  }
}

TEST_CASE("spawn allocates fresh generation-0 channels deterministically") {
  auto prog = fixtures::bank_program();
  Configuration c = boot(prog, "BankDemo");
  auto en = enabled(c);
  REQUIRE(en.size() == 1);
  CHECK(en[0].rule == RuleTag::Cut);
  Configuration c1 = step(c, en[0]);
  REQUIRE(c1.nodes.size() == 2);
  CHECK(c1.nodes[0].offer == ChanRef{"ua#0", 0});  // spawned left of the spawner
  CHECK(c1.nodes[0].running == "alice");
  CHECK(c1.nodes[1].offer == ChanRef{"root", 0});
  CHECK(c1.chan_info.at({"ua#0", 0}).sec == "alice");
  Configuration c1b = step(c, en[0]);
  CHECK(config_equal(c1, c1b));
}

TEST_CASE("closed bank runs to a single close message") {
  auto prog = fixtures::bank_program();
  for (Configuration c0 :
       {fixtures::bank_composite(prog), boot(prog, "BankDemo")}) {
    RunResult r = run_to_poised(std::move(c0));
    REQUIRE(r.config.nodes.size() == 1);
    CHECK(r.config.nodes[0].kind == NodeKind::Msg);
    CHECK(r.config.nodes[0].term->kind == TermKind::Close);
    CHECK(is_poised(r.config));
    CHECK(r.trace.size() > 20);
  }
}

TEST_CASE("already-poised run is the identity") {
  auto prog = fixtures::bank_program();
  RunResult r1 = run_to_poised(fixtures::bank_composite(prog));
  RunResult r2 = run_to_poised(r1.config);
  CHECK(r2.trace.empty());
  CHECK(config_equal(r1.config, r2.config));
}

TEST_CASE("booted Bank alone emits its sends and poises on the interface") {
  auto prog = fixtures::bank_program();
  RunResult r = run_to_poised(boot(prog, "Bank"));
  CHECK(r.trace.size() == 3);  // send x y, send x' y', u.lowRate
  REQUIRE(r.config.nodes.size() == 4);
  int msgs = 0;
  for (const auto& n : r.config.nodes) msgs += n.kind == NodeKind::Msg;
  CHECK(msgs == 3);
  CHECK(is_poised(r.config));
  // Blocked receiving y@1, which only the environment can close.
  const Node* bank = nullptr;
  for (const auto& n : r.config.nodes)
    if (n.kind == NodeKind::Proc) bank = &n;
  REQUIRE(bank != nullptr);
  CHECK(bank->term->kind == TermKind::Wait);
  CHECK(bank->term->subject == ChanRef{"y", 1});
}

TEST_CASE("step budget is enforced") {
  auto prog = fixtures::bank_program();
  CHECK_THROWS_AS(run_to_poised(boot(prog, "BankDemo"), Scheduler::leftmost(), 3),
                  StepBudgetExceeded);
}

TEST_CASE("schedulers agree on the final configuration") {
  auto prog = fixtures::bank_program();
  RunResult l = run_to_poised(boot(prog, "BankDemo"), Scheduler::leftmost());
  RunResult r = run_to_poised(boot(prog, "BankDemo"), Scheduler::rightmost());
  RunResult s1 = run_to_poised(boot(prog, "BankDemo"), Scheduler::random(1));
  RunResult s2 = run_to_poised(boot(prog, "BankDemo"), Scheduler::random(99));
  CHECK(config_equal_modulo_fresh(l.config, r.config));
  CHECK(config_equal_modulo_fresh(l.config, s1.config));
  CHECK(config_equal_modulo_fresh(l.config, s2.config));
  // Random scheduling is reproducible under the same seed.
  RunResult s1again = run_to_poised(boot(prog, "BankDemo"), Scheduler::random(1));
  CHECK(s1.trace.size() == s1again.trace.size());
  for (size_t i = 0; i < s1.trace.size(); ++i) {
    CHECK(s1.trace[i].rule == s1again.trace[i].rule);
    CHECK(s1.trace[i].chan == s1again.trace[i].chan);
  }
}

TEST_CASE("proc term-size multiset strictly decreases along every step") {
  auto prog = fixtures::bank_program();
  Configuration c = fixtures::bank_composite(prog);
  auto sizes = proc_term_sizes(c);
  int steps = 0;
  for (;;) {
    auto en = enabled(c);
    if (en.empty()) break;
    c = step(std::move(c), en[0]);
    auto next = proc_term_sizes(c);
    CHECK(multiset_less(next, sizes));
    sizes = std::move(next);
    ++steps;
  }
  CHECK(steps > 20);
}

TEST_CASE("multiset order sanity") {
  CHECK(multiset_less({1}, {2}));
  CHECK(multiset_less({}, {1}));
  CHECK(multiset_less({2, 2, 2}, {3}));
  CHECK(multiset_less({1, 3}, {3, 3}));
  CHECK(!multiset_less({3}, {3}));
  CHECK(!multiset_less({3}, {2, 2}));
  CHECK(!multiset_less({1, 2}, {1, 2}));
  CHECK(multiset_less({3}, {3, 1}));
}

TEST_CASE("diamond property on small fixtures, exhaustively") {
  auto prog = fixtures::load_shared(fixtures::kTensorFixture);
  Configuration c0 = compose({boot(prog, "Inner"), boot(prog, "Snd"), boot(prog, "Rcv")});

  // Walk every state reachable within 6 steps, check every divergent pair of
  // choices rejoins after at most one further step each.
  std::vector<Configuration> frontier{c0};
  int states = 0, pairs = 0;
  for (int depth = 0; depth < 6; ++depth) {
    std::vector<Configuration> next;
    for (const auto& c : frontier) {
      ++states;
      auto en = enabled(c);
      for (size_t a = 0; a < en.size(); ++a) {
        Configuration ca = step(c, en[a]);
        next.push_back(ca);
        for (size_t b = a + 1; b < en.size(); ++b) {
          Configuration cb = step(c, en[b]);
          ++pairs;
          if (config_equal_modulo_fresh(ca, cb)) continue;
          // Apply the other redex on each side; it stays identifiable by
          // (rule, subject channel).
          auto relocate = [&](const Configuration& cc, const StepChoice& want)
              -> std::optional<Configuration> {
            for (const auto& ch : enabled(cc))
              if (ch.rule == want.rule && ch.subject == want.subject)
                return step(cc, ch);
            return std::nullopt;
          };
          auto ra = relocate(ca, en[b]);
          auto rb = relocate(cb, en[a]);
          REQUIRE(ra.has_value());
          REQUIRE(rb.has_value());
          CHECK(config_equal_modulo_fresh(*ra, *rb));
        }
      }
    }
    frontier = std::move(next);
  }
  CHECK(states > 10);
  CHECK(pairs > 5);
}
