#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>
#include <tuple>

#include "cellseg/matching.hpp"
#include "cellseg/synth.hpp"
#include "test_helpers.hpp"

using namespace cellseg;

namespace {

OverlapTable table_from(std::initializer_list<std::tuple<int, int, int64_t>> edges,
                        std::initializer_list<std::pair<int, int64_t>> gt_areas,
                        std::initializer_list<std::pair<int, int64_t>> pred_areas) {
    OverlapTable t;
    for (auto [g, a] : gt_areas) t.gt_areas[static_cast<uint16_t>(g)] = a;
    for (auto [p, a] : pred_areas) t.pred_areas[static_cast<uint16_t>(p)] = a;
    for (auto [g, p, w] : edges)
        t.intersections[{static_cast<uint16_t>(g), static_cast<uint16_t>(p)}] = w;
    return t;
}

std::vector<std::pair<uint16_t, uint16_t>> pair_ids(const Matching& m) {
    std::vector<std::pair<uint16_t, uint16_t>> out;
    for (const auto& p : m.pairs) out.emplace_back(p.gt, p.pred);
    return out;
}

}  // namespace

TEST_CASE("max_weight_matching: empty table") {
    const Matching m = max_weight_matching(OverlapTable{});
    CHECK(m.pairs.empty());
    CHECK(m.unmatched_gt.empty());
    CHECK(m.unmatched_pred.empty());
    CHECK(m.total_intersection() == 0);
}

TEST_CASE("max_weight_matching: conflict resolved for total weight") {
    // (1,2) alone loses to (1,1)+(2,2): 45 < 55. Verified by enumeration.
    const auto t = table_from({{1, 1, 30}, {1, 2, 20}, {2, 2, 25}},
                              {{1, 60}, {2, 35}}, {{1, 40}, {2, 50}});
    const Matching fast = max_weight_matching(t);
    CHECK(fast.total_intersection() == 55);
    CHECK(pair_ids(fast) == std::vector<std::pair<uint16_t, uint16_t>>{{1, 1}, {2, 2}});

    const Matching brute = brute_force_matching(t, MatchObjective::TotalIntersection);
    CHECK(brute.total_intersection() == 55);
    CHECK(pair_ids(brute) == pair_ids(fast));
}

TEST_CASE("max_weight_matching: identity masks match every instance to itself") {
    SynthSpec spec;
    spec.seed = 21;
    spec.n_instances = 6;
    const LabelMask m = gen_instances(spec);
    const OverlapTable t = overlap_table(m, m);
    const Matching match = max_weight_matching(t);
    REQUIRE(match.pairs.size() == t.gt_areas.size());
    int64_t fg = 0;
    for (uint16_t v : m.labels) fg += v != 0;
    CHECK(match.total_intersection() == fg);
    for (const auto& p : match.pairs) {
        CHECK(p.gt == p.pred);
        CHECK(p.iou == 1.0);
    }
}

TEST_CASE("max_weight_matching equals brute force on seeded tables") {
    SplitMix64 rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        const OverlapTable t = testutil::random_table(rng, 7);
        const Matching fast = max_weight_matching(t);
        const Matching brute = brute_force_matching(t, MatchObjective::TotalIntersection);
        REQUIRE(fast.total_intersection() == brute.total_intersection());
        REQUIRE(pair_ids(fast) == pair_ids(brute));  // tie-break agreement too
        CHECK(fast.unmatched_gt == brute.unmatched_gt);
        CHECK(fast.unmatched_pred == brute.unmatched_pred);
    }
}

TEST_CASE("matching ties resolved toward lexicographically smallest pair list") {
    // two optimal matchings of weight 20: {(1,1),(2,2)} and {(1,2),(2,1)}
    const auto t = table_from({{1, 1, 10}, {1, 2, 10}, {2, 1, 10}, {2, 2, 10}},
                              {{1, 30}, {2, 30}}, {{1, 30}, {2, 30}});
    const Matching fast = max_weight_matching(t);
    CHECK(pair_ids(fast) == std::vector<std::pair<uint16_t, uint16_t>>{{1, 1}, {2, 2}});
    CHECK(pair_ids(brute_force_matching(t)) == pair_ids(fast));

    // single gt, two equal partners: smaller pred id wins
    const auto t2 = table_from({{1, 1, 10}, {1, 2, 10}}, {{1, 30}}, {{1, 30}, {2, 30}});
    CHECK(pair_ids(max_weight_matching(t2)) ==
          std::vector<std::pair<uint16_t, uint16_t>>{{1, 1}});
}

TEST_CASE("matching invariant under consistent id relabeling") {
    SplitMix64 rng(555);
    for (int trial = 0; trial < 20; ++trial) {
        const OverlapTable t = testutil::random_table(rng, 6);
        OverlapTable shifted;
        for (const auto& [id, a] : t.gt_areas) shifted.gt_areas[id + 100] = a;
        for (const auto& [id, a] : t.pred_areas) shifted.pred_areas[id + 200] = a;
        for (const auto& [key, w] : t.intersections)
            shifted.intersections[{static_cast<uint16_t>(key.first + 100),
                                   static_cast<uint16_t>(key.second + 200)}] = w;
        const Matching a = max_weight_matching(t);
        const Matching b = max_weight_matching(shifted);
        REQUIRE(a.pairs.size() == b.pairs.size());
        for (size_t i = 0; i < a.pairs.size(); ++i) {
            CHECK(a.pairs[i].gt + 100 == b.pairs[i].gt);
            CHECK(a.pairs[i].pred + 200 == b.pairs[i].pred);
            CHECK(a.pairs[i].intersection == b.pairs[i].intersection);
        }
    }
}

TEST_CASE("iou_threshold_matching: shifted square matches at tau 0.5") {
    auto [gt, pred] = testutil::shifted_square_pair();
    const Matching m = iou_threshold_matching(overlap_table(gt, pred), 0.5);
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0].iou == Catch::Approx(80.0 / 120.0).epsilon(1e-12));
}

TEST_CASE("iou_threshold_matching: pair below tau excluded") {
    // intersection 40, union 100 -> IoU 0.4
    const auto t = table_from({{1, 1, 40}}, {{1, 100}}, {{1, 40}});
    const Matching m = iou_threshold_matching(t, 0.5);
    CHECK(m.pairs.empty());
    CHECK(m.unmatched_gt == std::vector<uint16_t>{1});
    CHECK(m.unmatched_pred == std::vector<uint16_t>{1});
}

TEST_CASE("iou_threshold_matching: identity masks all at IoU 1") {
    SynthSpec spec;
    spec.seed = 31;
    spec.n_instances = 5;
    const LabelMask m = gen_instances(spec);
    const Matching match = iou_threshold_matching(overlap_table(m, m));
    REQUIRE(match.pairs.size() == 5);
    for (const auto& p : match.pairs) CHECK(p.iou == 1.0);
}

TEST_CASE("iou_threshold_matching: no result pair below tau, matches oracle") {
    SplitMix64 rng(808);
    for (int trial = 0; trial < 40; ++trial) {
        const OverlapTable t = testutil::random_table(rng, 6);
        for (double tau : {0.25, 0.5}) {
            const Matching fast = iou_threshold_matching(t, tau);
            for (const auto& p : fast.pairs) CHECK(p.iou >= tau);
            const Matching brute =
                brute_force_matching(t, MatchObjective::TotalIouAboveTau, tau);
            CHECK(pair_ids(fast) == pair_ids(brute));
        }
    }
}

TEST_CASE("iou_threshold_matching: strictly above half, candidates are unique") {
    // at tau > 0.5 on disjoint-instance masks, each pred can clear the bar
    // with at most one gt, so the candidate graph is already one-to-one
    for (int trial = 0; trial < 8; ++trial) {
        SynthSpec spec;
        spec.seed = 3100 + trial;
        spec.n_instances = 5;
        const LabelMask gt = gen_instances(spec);
        const LabelMask pred = perturb_mask(gt, ShiftMask{1, 1});
        const OverlapTable t = overlap_table(gt, pred);
        const double tau = 0.6;
        std::map<uint16_t, int> gt_deg, pred_deg;
        for (const auto& [key, inter] : t.intersections) {
            const int64_t uni =
                t.gt_areas.at(key.first) + t.pred_areas.at(key.second) - inter;
            if (static_cast<double>(inter) >= tau * static_cast<double>(uni)) {
                ++gt_deg[key.first];
                ++pred_deg[key.second];
            }
        }
        for (const auto& [id, deg] : gt_deg) CHECK(deg == 1);
        for (const auto& [id, deg] : pred_deg) CHECK(deg == 1);
        const Matching m = iou_threshold_matching(t, tau);
        CHECK(m.pairs.size() == gt_deg.size());
    }
}

TEST_CASE("iou_threshold_matching: tau validated") {
    CHECK_THROWS_AS(iou_threshold_matching(OverlapTable{}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(iou_threshold_matching(OverlapTable{}, 1.5), std::invalid_argument);
}

TEST_CASE("majority_coverage_map: strict half threshold") {
    const auto t = table_from({{1, 1, 50}, {2, 2, 80}}, {{1, 100}, {2, 100}},
                              {{1, 60}, {2, 90}});
    const CoverageMap cov = majority_coverage_map(t);
    CHECK(cov.covered_by.at(1).empty());  // exactly 50% is not a majority
    CHECK(cov.covered_by.at(2) == std::vector<uint16_t>{2});
}

TEST_CASE("majority_coverage_map: empty prediction leaves all gts uncovered") {
    OverlapTable t;
    t.gt_areas[1] = 40;
    t.gt_areas[2] = 60;
    const CoverageMap cov = majority_coverage_map(t);
    REQUIRE(cov.covered_by.size() == 2);
    CHECK(cov.covered_by.at(1).empty());
    CHECK(cov.covered_by.at(2).empty());
}

TEST_CASE("brute_force_matching: guards and small cases") {
    OverlapTable big;
    for (int g = 1; g <= 9; ++g) big.gt_areas[static_cast<uint16_t>(g)] = 10;
    CHECK_THROWS_AS(brute_force_matching(big), std::invalid_argument);

    CHECK(brute_force_matching(OverlapTable{}).pairs.empty());

    const auto one = table_from({{1, 1, 7}}, {{1, 10}}, {{1, 9}});
    const Matching m = brute_force_matching(one);
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0].intersection == 7);
}

TEST_CASE("every table id lands in exactly one bucket") {
    SplitMix64 rng(4242);
    for (int trial = 0; trial < 20; ++trial) {
        const OverlapTable t = testutil::random_table(rng, 7);
        const Matching m = max_weight_matching(t);
        std::set<uint16_t> gt_seen, pred_seen;
        for (const auto& p : m.pairs) {
            CHECK(gt_seen.insert(p.gt).second);
            CHECK(pred_seen.insert(p.pred).second);
        }
        for (uint16_t id : m.unmatched_gt) CHECK(gt_seen.insert(id).second);
        for (uint16_t id : m.unmatched_pred) CHECK(pred_seen.insert(id).second);
        CHECK(gt_seen.size() == t.gt_areas.size());
        CHECK(pred_seen.size() == t.pred_areas.size());
    }
}
