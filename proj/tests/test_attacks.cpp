#include <doctest.h>

#include <optional>
#include <vector>

#include "bdqcd/attacks.hpp"

using namespace bdqcd;

namespace {
HypothesisSet gaussian_set(std::initializer_list<double> means) {
    std::vector<DensityModel> ds;
    for (double m : means) ds.push_back(DensityModel::gaussian(m, 1.0));
    return HypothesisSet(std::move(ds));
}
}  // namespace

TEST_CASE("binary reverse assignment swaps the two densities") {
    auto hs = gaussian_set({0.0, 1.0});
    auto assign = build_reverse_assignment(hs);
    CHECK(assign.fake_of[0] == 1);  // pre-change fake stream follows P_1
    CHECK(assign.fake_of[1] == 0);  // post-change fake stream follows P_0

    SUBCASE("the swap is an involution") {
        // applying the q = 0 / q = 1 assignment twice recovers the identity
        CHECK(assign.fake_of[static_cast<std::size_t>(assign.fake_of[0])] == 0);
        CHECK(assign.fake_of[static_cast<std::size_t>(assign.fake_of[1])] == 1);
    }
}

TEST_CASE("multi-hypothesis reverse assignment follows the closest-alternative case split") {
    auto hs = gaussian_set({0.0, 1.0, 3.0});
    auto alts = hs.closest_alternatives();
    // I^0 = I(1,0) = 0.5 ties with I^1 = 0.5; q_m resolves to the smaller index 0
    auto assign = build_reverse_assignment(hs, alts);
    CHECK(assign.q_min == 0);
    CHECK(assign.tie_flagged);
    CHECK(assign.fake_of[0] == 1);  // P_{0,2} = P_{j*_0} = P_1
    CHECK(assign.fake_of[1] == 0);  // q = j*_{q_m}: symmetric swap back to P_{q_m}
    CHECK(assign.fake_of[2] == 1);  // P_{2,2} = P_{j*_2} = P_1
}

TEST_CASE("reverse attack is the honest rule run on the fake stream") {
    auto hs = gaussian_set({0.0, 1.0});
    AttackStrategy strategy;
    strategy.kind = AttackKind::reverse;
    strategy.compromised = {3};

    const std::uint64_t obs_seed = 777, tie_seed = 778;
    std::vector<RandomStream> fake_obs, fake_tie;
    fake_obs.emplace_back(obs_seed);
    fake_tie.emplace_back(tie_seed);
    AttackState attack(strategy, hs, ReportMechanism::multi_shot, 4.0,
                       std::move(fake_obs), std::move(fake_tie));

    // honest replica on the same fake stream: swapped densities, shared seeds
    SensorState replica(3, ReportMechanism::multi_shot, CusumMatrix::full(1), 4.0);
    RandomStream replica_obs(obs_seed), replica_tie(tie_seed);
    auto assign = build_reverse_assignment(hs);

    const std::int64_t nu = 20;
    for (std::int64_t t = 1; t <= 200; ++t) {
        auto msgs = attack.step(t, nu, 1);
        const int row = t <= nu ? 0 : 1;
        const double x =
            hs.density(assign.fake_of[static_cast<std::size_t>(row)]).sample(replica_obs);
        auto expected = replica.step(hs, x, replica_tie);
        if (expected.has_value()) {
            REQUIRE(msgs.size() == 1);
            CHECK(msgs[0].sender == 3);
            CHECK(msgs[0].hypothesis == expected->hypothesis);
            CHECK(msgs[0].kind == expected->kind);
        } else {
            CHECK(msgs.empty());
        }
    }
}

TEST_CASE("reverse attack with nu = infinity behaves like a sensor watching P_1") {
    auto hs = gaussian_set({0.0, 1.0});
    AttackStrategy strategy;
    strategy.kind = AttackKind::reverse;
    strategy.compromised = {0};
    std::vector<RandomStream> fake_obs, fake_tie;
    fake_obs.emplace_back(5);
    fake_tie.emplace_back(6);
    AttackState attack(strategy, hs, ReportMechanism::multi_shot, 5.0,
                       std::move(fake_obs), std::move(fake_tie));
    // fake stream draws from P_1 forever, so the local CUSUM crosses quickly
    bool reported = false;
    for (std::int64_t t = 1; t <= 200 && !reported; ++t)
        reported = !attack.step(t, std::nullopt, 1).empty();
    CHECK(reported);
}

TEST_CASE("silent_h0 and absent message shapes") {
    auto hs = gaussian_set({0.0, 1.0});
    AttackStrategy silent{AttackKind::silent_h0, {4, 5}, std::nullopt, 1};
    AttackState on_simultaneous(silent, hs, ReportMechanism::simultaneous, 3.0, {}, {});
    auto msgs = on_simultaneous.step(1, std::nullopt, 1);
    REQUIRE(msgs.size() == 2);  // one all-zero vector per compromised sensor
    for (const auto& m : msgs) {
        CHECK(m.kind == ReportMechanism::simultaneous);
        CHECK(m.accept_bits == 0);
    }

    AttackState on_multishot(silent, hs, ReportMechanism::multi_shot, 3.0, {}, {});
    CHECK(on_multishot.step(1, std::nullopt, 1).empty());

    AttackStrategy absent;
    absent.compromised = {4, 5};
    AttackState nothing(absent, hs, ReportMechanism::simultaneous, 3.0, {}, {});
    CHECK(nothing.step(1, std::nullopt, 1).empty());
}

TEST_CASE("always_alarm reports the target every step from activation") {
    auto hs = gaussian_set({0.0, 1.0, 3.0});
    AttackStrategy strategy{AttackKind::always_alarm, {7, 8, 9}, 2, 4};
    AttackState attack(strategy, hs, ReportMechanism::simultaneous, 3.0, {}, {});
    CHECK(attack.step(3, std::nullopt, 1).empty());  // before activation
    for (std::int64_t t = 4; t <= 6; ++t) {
        auto msgs = attack.step(t, std::nullopt, 1);
        REQUIRE(msgs.size() == 3);
        for (const auto& m : msgs) {
            CHECK(m.bit(2));
            CHECK_FALSE(m.bit(1));
        }
    }

    SUBCASE("target outside [Q] is a configuration error") {
        AttackStrategy bad{AttackKind::always_alarm, {7}, 9, 1};
        CHECK_THROWS_AS(
            AttackState(bad, hs, ReportMechanism::simultaneous, 3.0, {}, {}),
            std::invalid_argument);
    }
}

TEST_CASE("no attack emits more sender indices than the compromised set") {
    auto hs = gaussian_set({0.0, 1.0});
    AttackStrategy strategy{AttackKind::always_alarm, {2, 5}, 1, 1};
    AttackState attack(strategy, hs, ReportMechanism::multi_shot, 3.0, {}, {});
    for (std::int64_t t = 1; t <= 10; ++t) {
        auto msgs = attack.step(t, std::nullopt, 1);
        CHECK(msgs.size() == 2);
        for (const auto& m : msgs) CHECK((m.sender == 2 || m.sender == 5));
    }
}

TEST_CASE("default always_alarm target") {
    auto hs = gaussian_set({0.0, 1.0, 3.0});
    auto alts = hs.closest_alternatives();
    CHECK(default_always_alarm_target(hs, alts, true, 0) == 1);   // j*_0
    CHECK(default_always_alarm_target(hs, alts, false, 1) == 2);  // closest wrong type
    CHECK(default_always_alarm_target(hs, alts, false, 2) == 1);
}
