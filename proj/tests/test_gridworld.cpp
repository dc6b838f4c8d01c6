#include "pagc/gridworld.hpp"

#include <cmath>
#include <set>

#include "catch_amalgamated.hpp"

using namespace pagc;

TEST_CASE("new_world noise gradient endpoints and midpoint") {
    GridWorld w = new_world(0.20f, 0.10f, 7);
    CHECK(column_sigma(w, 0, false) == Catch::Approx(0.20).margin(1e-7));
    CHECK(column_sigma(w, 22, false) == Catch::Approx(0.10).margin(1e-7));
    CHECK(column_sigma(w, 11, false) == Catch::Approx(0.15).margin(1e-7));

    GridWorld s1 = new_world(0.60f, 0.03f, 7);
    // linear interpolation evaluated directly: 0.60 + (0.03-0.60)*5/22
    CHECK(column_sigma(s1, 5, false) == Catch::Approx(0.60 + (0.03 - 0.60) * 5.0 / 22.0).margin(1e-6));
}

TEST_CASE("new_world rejects negative noise and is seed-deterministic") {
    CHECK_THROWS_AS(new_world(-0.1f, 0.1f, 0), std::invalid_argument);
    CHECK_THROWS_AS(new_world(0.1f, -0.1f, 0), std::invalid_argument);

    GridWorld a = new_world(0.2f, 0.1f, 42);
    GridWorld b = new_world(0.2f, 0.1f, 42);
    GridWorld c = new_world(0.2f, 0.1f, 43);
    CHECK(a.mean_field == b.mean_field);
    CHECK(a.mean_field != c.mean_field);
    for (float v : a.mean_field) {
        CHECK(v >= 0.0f);
        CHECK(v < 1.0f);
    }
    CHECK(a.mean_field.size() == 23u * 7u);
}

TEST_CASE("column_sigma perturbation mirrors the noise map") {
    GridWorld w = new_world(0.20f, 0.10f, 7);
    CHECK(column_sigma(w, 0, true) == Catch::Approx(0.10).margin(1e-7));
    CHECK(column_sigma(w, 11, true) == Catch::Approx(0.15).margin(1e-7));  // mirror fixed point
    CHECK(column_sigma(w, 0, false) == Catch::Approx(0.20).margin(1e-7));
    CHECK_THROWS_AS(column_sigma(w, -1, false), std::out_of_range);
    CHECK_THROWS_AS(column_sigma(w, 23, false), std::out_of_range);

    // involution: sigma(col, perturbed) == sigma(22-col, unperturbed)
    for (int c = 0; c < 23; ++c)
        CHECK(column_sigma(w, c, true) == column_sigma(w, 22 - c, false));
}

TEST_CASE("observe returns the mean field under zero noise") {
    GridWorld w = new_world(0.0f, 0.0f, 3);
    std::fill(w.mean_field.begin(), w.mean_field.end(), 0.5f);
    RngStream rng(1);
    Observation patch = observe(w, {11, 3}, false, rng);
    for (float v : patch) CHECK(v == 0.5f);
}

TEST_CASE("observe zero-pads out-of-bounds neighbors") {
    GridWorld w = new_world(0.0f, 0.0f, 3);
    std::fill(w.mean_field.begin(), w.mean_field.end(), 0.5f);
    RngStream rng(1);
    Observation patch = observe(w, {0, 0}, false, rng);
    // order N, NE, E, SE, S, SW, W, NW; at the top-left corner only E, SE, S are inside
    CHECK(patch[0] == 0.0f);
    CHECK(patch[1] == 0.0f);
    CHECK(patch[2] == 0.5f);
    CHECK(patch[3] == 0.5f);
    CHECK(patch[4] == 0.5f);
    CHECK(patch[5] == 0.0f);
    CHECK(patch[6] == 0.0f);
    CHECK(patch[7] == 0.0f);
}

TEST_CASE("observe consumes draws for out-of-bounds neighbors too") {
    GridWorld w = new_world(0.2f, 0.1f, 3);
    RngStream a(99), b(99);
    observe(w, {0, 0}, false, a);
    for (int i = 0; i < kPatchDim; ++i) b.normal();
    CHECK(a.uniform() == b.uniform());
}

TEST_CASE("observe noise variance matches the column formula") {
    GridWorld w = new_world(0.20f, 0.10f, 5);
    RngStream rng(2024);
    const int n = 10000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        Observation patch = observe(w, {11, 3}, false, rng);
        sum += patch[2];  // E neighbor, column 12
        sum2 += static_cast<double>(patch[2]) * patch[2];
    }
    double var = (sum2 - sum * sum / n) / (n - 1);
    double sigma = column_sigma(w, 12, false);
    CHECK(var == Catch::Approx(sigma * sigma).epsilon(0.05));
}

TEST_CASE("step_action clamps at edges and never mutates the world") {
    GridWorld w = new_world(0.2f, 0.1f, 3);
    auto before = w.mean_field;
    CHECK(step_action(w, {0, 0}, Action::Left) == AgentPos{0, 0});
    CHECK(step_action(w, {0, 0}, Action::Up) == AgentPos{0, 0});
    CHECK(step_action(w, {11, 3}, Action::Stay) == AgentPos{11, 3});
    CHECK(step_action(w, {11, 3}, Action::Right) == AgentPos{12, 3});
    CHECK(step_action(w, {22, 6}, Action::Down) == AgentPos{22, 6});
    CHECK(w.mean_field == before);
}

TEST_CASE("zone mapping") {
    CHECK(zone_of(0) == 0);
    CHECK(zone_of(22) == 4);
    CHECK(zone_of(10) == 2);  // floor(50/23)
    CHECK_THROWS_AS(zone_of(-1), std::out_of_range);
    CHECK_THROWS_AS(zone_of(23), std::out_of_range);

    std::array<int, kNumZones> sizes{};
    int prev = 0;
    for (int c = 0; c < 23; ++c) {
        int z = zone_of(c);
        CHECK(z >= prev);  // monotone non-decreasing
        prev = z;
        sizes[z]++;
    }
    CHECK(sizes == std::array<int, 5>{5, 5, 4, 5, 4});
}

TEST_CASE("perturbation schedules") {
    SECTION("empty") {
        RngStream rng(1);
        auto s = schedule_perturbations(0, 240, 15, rng);
        CHECK(s.windows.empty());
        CHECK(s.perturbed_steps() == 0);
    }
    SECTION("four disjoint windows cover 60 steps") {
        RngStream rng(5);
        auto s = schedule_perturbations(4, 240, 15, rng);
        REQUIRE(s.windows.size() == 4u);
        CHECK(s.perturbed_steps() == 60);
        for (size_t i = 0; i + 1 < s.windows.size(); ++i)
            CHECK(s.windows[i + 1].first > s.windows[i].second);
        for (auto& [a, b] : s.windows) {
            CHECK(a >= 0);
            CHECK(b < 240);
            CHECK(b - a + 1 == 15);
        }
    }
    SECTION("tight packing tiles the episode exactly") {
        RngStream rng(9);
        auto s = schedule_perturbations(16, 240, 15, rng);
        REQUIRE(s.windows.size() == 16u);
        CHECK(s.perturbed_steps() == 240);
        std::set<int> covered;
        for (auto& [a, b] : s.windows)
            for (int t = a; t <= b; ++t) covered.insert(t);
        CHECK(covered.size() == 240u);
    }
    SECTION("infeasible counts rejected") {
        RngStream rng(1);
        CHECK_THROWS_AS(schedule_perturbations(17, 240, 15, rng), std::invalid_argument);
        CHECK_THROWS_AS(schedule_perturbations(-1, 240, 15, rng), std::invalid_argument);
    }
    SECTION("deterministic given the stream, valid over many draws") {
        RngStream a(77), b(77);
        for (int rep = 0; rep < 50; ++rep) {
            auto s1 = schedule_perturbations(4, 240, 15, a);
            auto s2 = schedule_perturbations(4, 240, 15, b);
            CHECK(s1.windows == s2.windows);
            for (size_t i = 0; i + 1 < s1.windows.size(); ++i)
                CHECK(s1.windows[i + 1].first > s1.windows[i].second);
        }
    }
}

TEST_CASE("observation sequences are deterministic in the seeds") {
    GridWorld w1 = new_world(0.2f, 0.1f, 11);
    GridWorld w2 = new_world(0.2f, 0.1f, 11);
    RngStream r1(5), r2(5);
    AgentPos p1 = center_pos(), p2 = center_pos();
    const Action acts[] = {Action::Left, Action::Up, Action::Right, Action::Stay, Action::Down};
    for (int t = 0; t < 200; ++t) {
        Observation o1 = observe(w1, p1, t % 3 == 0, r1);
        Observation o2 = observe(w2, p2, t % 3 == 0, r2);
        CHECK(o1 == o2);
        p1 = step_action(w1, p1, acts[t % 5]);
        p2 = step_action(w2, p2, acts[t % 5]);
    }
}
