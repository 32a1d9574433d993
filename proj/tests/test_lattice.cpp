#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracle_helpers.hpp"
#include "sillsec/lattice.hpp"

using namespace sillsec;

namespace {

LatticeDecl bank_decl() {
  return {{"guest", "alice", "bob", "bank"},
          {{"guest", "alice"}, {"alice", "bank"}, {"guest", "bob"}, {"bob", "bank"}},
          {}};
}

SecLevel c(const std::string& n) { return SecLevel::concrete(n); }

}  // namespace

TEST_CASE("bank lattice validates with expected top and bottom") {
  auto lat = validate_lattice(bank_decl());
  CHECK(lat.top() == "bank");
  CHECK(lat.bottom() == "guest");
  CHECK(lat.levels().size() == 4);
}

TEST_CASE("two-cycle is rejected") {
  LatticeDecl d{{"a", "b"}, {{"a", "b"}, {"b", "a"}}, {}};
  CHECK_THROWS_AS(validate_lattice(d), CycleError);
}

TEST_CASE("pair without least upper bound is rejected") {
  LatticeDecl d{{"a", "b", "c", "d"},
                {{"a", "c"}, {"b", "c"}, {"a", "d"}, {"b", "d"}},
                {}};
  // Independent check that (a,b) has upper bounds {c,d} with no least element.
  auto ubs = oracle::upper_bounds(d, "a", "b");
  REQUIRE(ubs == std::vector<std::string>{"c", "d"});
  CHECK(!oracle::reachable(d, "c", "d"));
  CHECK(!oracle::reachable(d, "d", "c"));
  CHECK(oracle::brute_join(d, "a", "b") == std::nullopt);
  CHECK_THROWS_AS(validate_lattice(d), NoJoinError);
}

TEST_CASE("unknown level in order clause") {
  LatticeDecl d{{"a"}, {{"a", "z"}}, {}};
  CHECK_THROWS_AS(validate_lattice(d), UnknownLevel);
}

TEST_CASE("leq basics") {
  auto lat = validate_lattice(bank_decl());
  CHECK(lat.leq(c("guest"), c("alice")));
  CHECK(lat.leq(c("alice"), c("alice")));
  CHECK(lat.leq(c("guest"), c("bank")));
  // alice vs bob are incomparable: cross-check against DFS reachability.
  auto d = bank_decl();
  CHECK(lat.leq(c("alice"), c("bob")) == oracle::reachable(d, "alice", "bob"));
  CHECK(!lat.leq(c("alice"), c("bob")));
  CHECK(!lat.leq(c("bob"), c("alice")));
  CHECK_THROWS_AS(lat.leq(c("nope"), c("alice")), UnknownLevel);
}

TEST_CASE("join basics") {
  auto lat = validate_lattice(bank_decl());
  CHECK(lat.join(c("guest"), c("alice")).name == "alice");
  CHECK(lat.join(c("bank"), c("guest")).name == "bank");
  auto d = bank_decl();
  CHECK(lat.join(c("alice"), c("bob")).name == *oracle::brute_join(d, "alice", "bob"));
  CHECK(lat.join(c("alice"), c("bob")).name == "bank");
}

TEST_CASE("variable binding resolves eagerly") {
  auto lat = validate_lattice(bank_decl());
  auto psi = SecLevel::var("psi0");
  CHECK_THROWS_AS(lat.leq(psi, c("alice")), UnboundVariable);

  auto lat2 = lat.bind_var("psi0", c("alice"));
  CHECK(lat2.leq(psi, c("alice")));
  CHECK(lat2.leq(c("alice"), psi));
  CHECK(lat2.join(psi, c("guest")).name == "alice");
  // Original is untouched.
  CHECK_THROWS_AS(lat.leq(psi, c("alice")), UnboundVariable);
  CHECK_THROWS_AS(lat2.bind_var("psi0", c("guest")), DuplicateBinding);
}

TEST_CASE("binding is referentially transparent") {
  auto lat = validate_lattice(bank_decl()).bind_var("p", c("bob"));
  auto p = SecLevel::var("p");
  for (const auto& l : lat.levels()) {
    CHECK(lat.leq(p, c(l)) == lat.leq(c("bob"), c(l)));
    CHECK(lat.leq(c(l), p) == lat.leq(c(l), c("bob")));
    CHECK(lat.join(p, c(l)).name == lat.join(c("bob"), c(l)).name);
  }
}

TEST_CASE("lattice laws on random declarations") {
  std::mt19937 rng(7);
  int valid_seen = 0;
  for (int iter = 0; iter < 400; ++iter) {
    int n = 2 + int(rng() % 4);
    LatticeDecl d;
    for (int i = 0; i < n; ++i) d.levels.push_back("l" + std::to_string(i));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && rng() % 3 == 0) d.order.push_back({d.levels[i], d.levels[j]});

    SecurityLattice lat;
    try {
      lat = validate_lattice(d);
    } catch (const LatticeError&) {
      // The validator and the brute-force oracle must agree on rejection.
      bool cyclic = false;
      for (int i = 0; i < n && !cyclic; ++i)
        for (int j = 0; j < n && !cyclic; ++j)
          if (i != j && oracle::reachable(d, d.levels[i], d.levels[j]) &&
              oracle::reachable(d, d.levels[j], d.levels[i]))
            cyclic = true;
      bool joinless = false;
      if (!cyclic)
        for (int i = 0; i < n && !joinless; ++i)
          for (int j = 0; j < n && !joinless; ++j)
            if (!oracle::brute_join(d, d.levels[i], d.levels[j])) joinless = true;
      CHECK((cyclic || joinless));
      continue;
    }
    ++valid_seen;

    auto L = [&](int i) { return c(d.levels[i]); };
    for (int i = 0; i < n; ++i) {
      CHECK(lat.leq(L(i), L(i)));
      for (int j = 0; j < n; ++j) {
        CHECK(lat.leq(L(i), L(j)) == oracle::reachable(d, d.levels[i], d.levels[j]));
        CHECK(lat.join(L(i), L(j)).name == lat.join(L(j), L(i)).name);
        CHECK(lat.join(L(i), L(i)).name == d.levels[i]);
        CHECK(lat.leq(L(i), lat.join(L(i), L(j))));
        CHECK(lat.join(L(i), L(j)).name == *oracle::brute_join(d, d.levels[i], d.levels[j]));
        for (int k = 0; k < n; ++k) {
          auto ab_c = lat.join(lat.join(L(i), L(j)), L(k)).name;
          auto a_bc = lat.join(L(i), lat.join(L(j), L(k))).name;
          CHECK(ab_c == a_bc);
        }
        if (lat.leq(L(i), L(j))) {
          for (int k = 0; k < n; ++k)
            if (lat.leq(L(j), L(k))) CHECK(lat.leq(L(i), L(k)));
        }
      }
    }
  }
  CHECK(valid_seen > 20);
}
