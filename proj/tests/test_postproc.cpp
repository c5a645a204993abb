#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "microseg/core/rng.hpp"
#include "microseg/postproc/metrics.hpp"
#include "microseg/postproc/postproc.hpp"

using namespace microseg;
using namespace microseg::post;

namespace {

ActionTimeline tl(std::vector<int> labels, double fps = 10.0) {
    ActionTimeline t;
    t.labels = std::move(labels);
    t.fps = fps;
    return t;
}

// grammar-consistent random timeline built by walking the suture cycle
ActionTimeline random_valid_timeline(Rng& rng, int64_t min_seg = 10, int64_t max_seg = 40,
                                     int segments = 12) {
    static const std::vector<int> cycle = {2, 3, 4, 5, 6};
    ActionTimeline t;
    t.fps = 10.0;
    size_t pos = rng.below(cycle.size());
    for (int s = 0; s < segments; ++s) {
        int cls;
        if (s % 2 == 0) {
            cls = 0; // "No" glue between actions
        } else {
            cls = cycle[pos % cycle.size()];
            ++pos;
        }
        int64_t len = min_seg + static_cast<int64_t>(rng.below(
                                    static_cast<uint64_t>(max_seg - min_seg + 1)));
        for (int64_t i = 0; i < len; ++i) t.labels.push_back(cls);
    }
    return t;
}

} // namespace

TEST_CASE("short runs are absorbed into their neighbors") {
    ActionTimeline t = tl({1, 1, 1, 1, 1, 2, 2, 1, 1, 1, 1, 1});
    ActionTimeline out = remove_short_segments(t, 5);
    for (int l : out.labels) CHECK(l == 1);

    // a segment of exactly min_len survives
    ActionTimeline t2 = tl({1, 1, 1, 1, 1, 2, 2, 2, 2, 2});
    ActionTimeline out2 = remove_short_segments(t2, 5);
    CHECK(out2.labels == t2.labels);

    // degenerate single-class short timeline is untouched
    ActionTimeline t3 = tl({4, 4, 4});
    CHECK(remove_short_segments(t3, 5).labels == t3.labels);
}

TEST_CASE("short-segment removal ties prefer the preceding segment") {
    // 2-run of class 9 between equal-length neighbors of different classes
    ActionTimeline t = tl({1, 1, 1, 1, 1, 3, 3, 2, 2, 2, 2, 2});
    ActionTimeline out = remove_short_segments(t, 5);
    CHECK(out.labels == std::vector<int>({1, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2}));
}

TEST_CASE("short-segment removal is idempotent and never adds segments") {
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        ActionTimeline t;
        t.fps = 10.0;
        int64_t n = 20 + static_cast<int64_t>(rng.below(80));
        for (int64_t i = 0; i < n; ++i)
            t.labels.push_back(static_cast<int>(rng.below(4)));
        ActionTimeline once = remove_short_segments(t, 5);
        ActionTimeline twice = remove_short_segments(once, 5);
        CHECK(once.labels == twice.labels);
        CHECK(once.segments().size() <= t.segments().size());
        if (once.segments().size() > 1)
            for (const Segment& s : once.segments()) CHECK(s.length() >= 5);
    }
}

TEST_CASE("run-length segment view round-trips") {
    Rng rng(6);
    for (int rep = 0; rep < 30; ++rep) {
        ActionTimeline t;
        t.fps = 10.0;
        int64_t n = 1 + static_cast<int64_t>(rng.below(60));
        for (int64_t i = 0; i < n; ++i) t.labels.push_back(static_cast<int>(rng.below(7)));
        ActionTimeline rt = ActionTimeline::from_segments(t.segments(), t.fps);
        CHECK(rt.labels == t.labels);
    }
}

TEST_CASE("default grammar repairs an impossible transition") {
    ActionGrammar g = default_grammar();
    // knot_cutting directly after needle_handling is impossible in the cycle
    ActionTimeline t = tl({2, 2, 2, 2, 2, 2, 6, 6, 6, 6, 6, 6});
    ActionTimeline out = apply_grammar(t, g);
    CHECK(out.labels[8] == g.default_repair);
    for (const Segment& s : out.segments()) CHECK(s.length() >= 1);

    // all adjacent pairs valid afterwards
    auto segs = out.segments();
    for (size_t i = 1; i < segs.size(); ++i)
        CHECK(g.transition_allowed(segs[i - 1].class_id, segs[i].class_id));
}

TEST_CASE("grammar application is idempotent and repairs every context") {
    ActionGrammar g = default_grammar();
    // enumerate all (prev, self, next) contexts
    for (int a = 0; a < kNumActionClasses; ++a)
        for (int b = 0; b < kNumActionClasses; ++b)
            for (int c = 0; c < kNumActionClasses; ++c) {
                ActionTimeline t;
                t.fps = 10.0;
                for (int i = 0; i < 6; ++i) t.labels.push_back(a);
                for (int i = 0; i < 6; ++i) t.labels.push_back(b);
                for (int i = 0; i < 6; ++i) t.labels.push_back(c);
                ActionTimeline out = apply_grammar(t, g);
                auto segs = out.segments();
                for (size_t i = 1; i < segs.size(); ++i)
                    CHECK(g.transition_allowed(segs[i - 1].class_id, segs[i].class_id));
                ActionTimeline again = apply_grammar(out, g);
                CHECK(again.labels == out.labels);
                CHECK(out.labels.size() == t.labels.size());
            }
}

TEST_CASE("valid timelines pass through the grammar unchanged") {
    ActionGrammar g = default_grammar();
    Rng rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        ActionTimeline t = random_valid_timeline(rng);
        CHECK(apply_grammar(t, g).labels == t.labels);
    }
    ActionTimeline no_only = tl({0, 0, 0, 0});
    CHECK(apply_grammar(no_only, g).labels == no_only.labels);
}

TEST_CASE("grammar file round-trip") {
    ActionGrammar g = default_grammar();
    g.repairs[{2, 6}] = 3;
    std::string path = "test_grammar.json";
    g.save_file(path);
    ActionGrammar r = ActionGrammar::load_file(path);
    CHECK(r.allowed == g.allowed);
    CHECK(r.repairs == g.repairs);
    CHECK(r.default_repair == g.default_repair);
    std::remove(path.c_str());
}

TEST_CASE("frame accuracy basics") {
    CHECK(frame_accuracy(tl({1, 1, 2, 2}), tl({1, 2, 2, 2})) == doctest::Approx(0.75));
    CHECK(frame_accuracy(tl({1, 2}), tl({1, 2})) == 1.0);
    CHECK(frame_accuracy(tl({1, 2}), tl({3, 4})) == 0.0);
    CHECK_THROWS(frame_accuracy(tl({1}), tl({1, 2})));

    Rng rng(10);
    for (int rep = 0; rep < 20; ++rep) {
        ActionTimeline a = random_valid_timeline(rng, 3, 9, 6);
        ActionTimeline b = a;
        for (int& l : b.labels)
            if (rng.bernoulli(0.3)) l = static_cast<int>(rng.below(7));
        CHECK(frame_accuracy(a, b) == frame_accuracy(b, a));
    }
}

TEST_CASE("segment metrics on identical and disjoint timelines") {
    Rng rng(11);
    ActionTimeline a = random_valid_timeline(rng);
    SegmentMetricsReport same = segment_metrics(a, a);
    CHECK(same.overall.precision == 1.0);
    CHECK(same.overall.recall == 1.0);
    CHECK(same.overall.f1 == 1.0);
    CHECK(same.overall.jaccard == 1.0);
    CHECK(same.frame_accuracy == 1.0);
    for (const auto& m : same.per_class) {
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
        CHECK(m.jaccard == 1.0);
    }

    // shifted far enough that nothing overlaps: all segment metrics zero
    ActionTimeline p = tl({1, 1, 1, 0, 0, 0, 2, 2, 2, 0, 0, 0});
    ActionTimeline g = tl({0, 0, 0, 1, 1, 1, 0, 0, 0, 2, 2, 2});
    SegmentMetricsReport rep = segment_metrics(p, g);
    CHECK(rep.overall.tp == 0);
    CHECK(rep.overall.precision == 0.0);
    CHECK(rep.overall.recall == 0.0);
    CHECK(rep.overall.f1 == 0.0);
}

TEST_CASE("greedy segmental matching equals the exhaustive oracle") {
    Rng rng(13);
    for (int rep = 0; rep < 1000; ++rep) {
        // random timelines with <= 5 segments per class
        ActionTimeline gt;
        gt.fps = 10.0;
        int segs = 2 + static_cast<int>(rng.below(8));
        for (int s = 0; s < segs; ++s) {
            int cls = static_cast<int>(rng.below(3));
            int64_t len = 1 + static_cast<int64_t>(rng.below(12));
            for (int64_t i = 0; i < len; ++i) gt.labels.push_back(cls);
        }
        ActionTimeline pred = gt;
        for (int& l : pred.labels)
            if (rng.bernoulli(0.25)) l = static_cast<int>(rng.below(3));

        SegmentMetricsReport report = segment_metrics(pred, gt);
        int64_t oracle = 0;
        for (int c = 0; c < 3; ++c) {
            std::vector<Segment> ps, gs;
            for (const Segment& s : pred.segments())
                if (s.class_id == c) ps.push_back(s);
            for (const Segment& s : gt.segments())
                if (s.class_id == c) gs.push_back(s);
            oracle += exhaustive_match_count(ps, gs, 0.5);
        }
        CHECK(report.overall.tp == oracle);
    }
}

TEST_CASE("three-segment constructed case matches hand counts") {
    // pred: [1 x6][2 x6][1 x6]; gt: [1 x6][2 x3][1 x9]
    ActionTimeline pred = tl({1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 1, 1, 1, 1, 1, 1});
    ActionTimeline gt = tl({1, 1, 1, 1, 1, 1, 2, 2, 2, 1, 1, 1, 1, 1, 1, 1, 1, 1});
    SegmentMetricsReport rep = segment_metrics(pred, gt);
    // class 1: first segments match IoU 1; trailing pred [12..17] vs gt [9..17]: IoU 6/9 >= .5
    CHECK(rep.per_class[1].tp == 2);
    // class 2: IoU 3/6 = 0.5 exactly -> matched at threshold 0.5
    CHECK(rep.per_class[2].tp == 1);
    CHECK(rep.overall.tp == 3);
    CHECK(rep.overall.precision == 1.0);
    CHECK(rep.overall.recall == 1.0);
}

TEST_CASE("post-processing never hurts on isolated-flip corruption") {
    ActionGrammar g = default_grammar();
    Rng rng(17);
    int strict_gains = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        ActionTimeline gt = random_valid_timeline(rng);
        ActionTimeline noisy = gt;
        // ~10% isolated single-frame flips, never adjacent
        int64_t n = gt.frame_count();
        int64_t last_flip = -2;
        for (int64_t i = 0; i < n; ++i) {
            if (i - last_flip < 2) continue;
            if (!rng.bernoulli(0.1)) continue;
            int wrong = static_cast<int>(rng.below(7));
            if (wrong == gt.labels[static_cast<size_t>(i)]) wrong = (wrong + 1) % 7;
            noisy.labels[static_cast<size_t>(i)] = wrong;
            last_flip = i;
        }
        ActionTimeline cleaned = apply_grammar(remove_short_segments(noisy, 5), g);
        double before = frame_accuracy(noisy, gt);
        double after = frame_accuracy(cleaned, gt);
        CHECK(after >= before);
        if (after > before) ++strict_gains;
    }
    CHECK(strict_gains >= 99);
}
