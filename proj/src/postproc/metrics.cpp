#include "microseg/postproc/metrics.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

#include "json.hpp"

namespace microseg::post {

using nlohmann::json;

double frame_accuracy(const ActionTimeline& pred, const ActionTimeline& gt) {
    if (pred.labels.size() != gt.labels.size())
        throw std::invalid_argument("frame_accuracy: length mismatch");
    if (pred.labels.empty()) throw std::invalid_argument("frame_accuracy: empty timelines");
    int64_t hit = 0;
    for (size_t i = 0; i < pred.labels.size(); ++i)
        if (pred.labels[i] == gt.labels[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(pred.labels.size());
}

double segment_iou(const Segment& a, const Segment& b) {
    int64_t inter = std::min(a.end_frame, b.end_frame) - std::max(a.start_frame, b.start_frame) + 1;
    if (inter <= 0) return 0.0;
    int64_t uni = a.length() + b.length() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

struct Candidate {
    double iou;
    size_t pred_idx;
    size_t gt_idx;
};

double f1_of(double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

} // namespace

int64_t exhaustive_match_count(const std::vector<Segment>& pred, const std::vector<Segment>& gt,
                               double iou_threshold) {
    // recursion over predicted segments with a bitmask of used gt segments
    if (gt.size() > 20) throw std::invalid_argument("exhaustive_match_count: too many segments");
    int64_t best = 0;
    std::vector<std::vector<size_t>> edges(pred.size());
    for (size_t p = 0; p < pred.size(); ++p)
        for (size_t g = 0; g < gt.size(); ++g)
            if (pred[p].class_id == gt[g].class_id &&
                segment_iou(pred[p], gt[g]) >= iou_threshold)
                edges[p].push_back(g);

    std::function<void(size_t, uint32_t, int64_t)> rec = [&](size_t p, uint32_t used,
                                                             int64_t count) {
        if (p == pred.size()) {
            best = std::max(best, count);
            return;
        }
        rec(p + 1, used, count); // leave pred p unmatched
        for (size_t g : edges[p])
            if (!(used & (1u << g))) rec(p + 1, used | (1u << g), count + 1);
    };
    rec(0, 0, 0);
    return best;
}

SegmentMetricsReport segment_metrics(const ActionTimeline& pred, const ActionTimeline& gt,
                                     const SegmentMetricsOptions& opts) {
    if (pred.labels.size() != gt.labels.size())
        throw std::invalid_argument("segment_metrics: length mismatch");
    if (opts.iou_threshold <= 0.0 || opts.iou_threshold > 1.0)
        throw std::invalid_argument("segment_metrics: threshold must be in (0, 1]");

    std::vector<Segment> ps = pred.segments();
    std::vector<Segment> gs = gt.segments();

    // greedy matching by descending IoU, deterministic tie order
    std::vector<Candidate> cands;
    for (size_t p = 0; p < ps.size(); ++p)
        for (size_t g = 0; g < gs.size(); ++g) {
            if (ps[p].class_id != gs[g].class_id) continue;
            double iou = segment_iou(ps[p], gs[g]);
            if (iou >= opts.iou_threshold) cands.push_back({iou, p, g});
        }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.pred_idx != b.pred_idx) return a.pred_idx < b.pred_idx;
        return a.gt_idx < b.gt_idx;
    });
    std::vector<bool> pred_used(ps.size(), false), gt_used(gs.size(), false);
    std::array<int64_t, kNumActionClasses> tp{}, np{}, ng{};
    for (const Candidate& c : cands) {
        if (pred_used[c.pred_idx] || gt_used[c.gt_idx]) continue;
        pred_used[c.pred_idx] = true;
        gt_used[c.gt_idx] = true;
        ++tp[static_cast<size_t>(ps[c.pred_idx].class_id)];
    }
    for (const Segment& s : ps) ++np[static_cast<size_t>(s.class_id)];
    for (const Segment& s : gs) ++ng[static_cast<size_t>(s.class_id)];

    // frame-level per-class intersection / union
    std::array<int64_t, kNumActionClasses> inter{}, uni{};
    for (size_t i = 0; i < pred.labels.size(); ++i) {
        int p = pred.labels[i], g = gt.labels[i];
        if (p == g) {
            ++inter[static_cast<size_t>(p)];
            ++uni[static_cast<size_t>(p)];
        } else {
            ++uni[static_cast<size_t>(p)];
            ++uni[static_cast<size_t>(g)];
        }
    }

    SegmentMetricsReport rep;
    rep.frame_accuracy = frame_accuracy(pred, gt);
    int64_t tp_all = 0, np_all = 0, ng_all = 0;
    double jaccard_sum = 0.0;
    int64_t jaccard_n = 0;
    for (int c = 0; c < kNumActionClasses; ++c) {
        auto ci = static_cast<size_t>(c);
        ClassMetrics& m = rep.per_class[ci];
        m.tp = tp[ci];
        m.fp = np[ci] - tp[ci];
        m.fn = ng[ci] - tp[ci];
        m.present = np[ci] + ng[ci] > 0;
        if (m.present) {
            m.precision = np[ci] > 0 ? static_cast<double>(m.tp) / static_cast<double>(np[ci]) : 0.0;
            m.recall = ng[ci] > 0 ? static_cast<double>(m.tp) / static_cast<double>(ng[ci]) : 0.0;
            m.f1 = f1_of(m.precision, m.recall);
            if (opts.segmental_jaccard) {
                int64_t denom = m.tp + m.fp + m.fn;
                m.jaccard = denom > 0 ? static_cast<double>(m.tp) / static_cast<double>(denom) : 1.0;
            } else {
                m.jaccard = uni[ci] > 0
                                ? static_cast<double>(inter[ci]) / static_cast<double>(uni[ci])
                                : 1.0;
            }
            jaccard_sum += m.jaccard;
            ++jaccard_n;
        }
        tp_all += tp[ci];
        np_all += np[ci];
        ng_all += ng[ci];
    }
    rep.overall.tp = tp_all;
    rep.overall.fp = np_all - tp_all;
    rep.overall.fn = ng_all - tp_all;
    rep.overall.present = np_all + ng_all > 0;
    rep.overall.precision = np_all > 0 ? static_cast<double>(tp_all) / static_cast<double>(np_all) : 0.0;
    rep.overall.recall = ng_all > 0 ? static_cast<double>(tp_all) / static_cast<double>(ng_all) : 0.0;
    rep.overall.f1 = f1_of(rep.overall.precision, rep.overall.recall);
    rep.overall.jaccard = jaccard_n > 0 ? jaccard_sum / static_cast<double>(jaccard_n) : 1.0;
    return rep;
}

std::string SegmentMetricsReport::to_json_string() const {
    json j;
    auto dump_class = [](const ClassMetrics& m) {
        json c;
        c["precision"] = m.precision;
        c["recall"] = m.recall;
        c["f1"] = m.f1;
        c["jaccard"] = m.jaccard;
        c["tp"] = m.tp;
        c["fp"] = m.fp;
        c["fn"] = m.fn;
        c["present"] = m.present;
        return c;
    };
    j["frame_accuracy"] = frame_accuracy;
    j["overall"] = dump_class(overall);
    json pc = json::object();
    for (int c = 0; c < kNumActionClasses; ++c)
        pc[action_class_names()[static_cast<size_t>(c)]] =
            dump_class(per_class[static_cast<size_t>(c)]);
    j["per_class"] = std::move(pc);
    return j.dump(2);
}

} // namespace microseg::post
