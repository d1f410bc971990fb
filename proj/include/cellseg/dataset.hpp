#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cellseg/io/png_io.hpp"
#include "cellseg/metrics.hpp"

namespace cellseg {

struct PairPaths {
    std::string image_id;
    std::string gt_path;
    std::string pred_path;
    std::optional<std::string> ignore_path;
};

struct EvalOptions {
    double iou_tau = 0.5;
    DetWeights det_weights;
    bool ignore_rule = false;  // off by default; ignore masks are used only when on
    int threads = 0;           // 0 = hardware concurrency
};

namespace detail {

inline IgnoreRegion ignore_from_mask(const LabelMask& m) {
    IgnoreRegion r(m.height, m.width);
    for (size_t i = 0; i < m.size(); ++i) r.mask[i] = m.labels[i] != 0 ? 1 : 0;
    return r;
}

struct PairOutcome {
    bool failed = false;
    std::string error;
    ImageMetrics metrics;
};

inline PairOutcome evaluate_one(const PairPaths& pair, const EvalOptions& opts) {
    PairOutcome out;
    try {
        const LabelMask gt = read_label_png(pair.gt_path);
        const LabelMask pred = read_label_png(pair.pred_path);
        if (opts.ignore_rule && pair.ignore_path) {
            const IgnoreRegion region = ignore_from_mask(read_label_png(*pair.ignore_path));
            out.metrics = evaluate_pair(gt, pred, &region, opts.iou_tau, opts.det_weights);
        } else {
            out.metrics = evaluate_pair(gt, pred, nullptr, opts.iou_tau, opts.det_weights);
        }
    } catch (const std::exception& e) {
        out.failed = true;
        out.error = e.what();
    }
    return out;
}

}  // namespace detail

/// Evaluate many (gt, pred) pairs, optionally in parallel. Output is ordered
/// by image id and identical regardless of the worker count.
inline MetricReport evaluate_dataset(std::vector<PairPaths> pairs, const EvalOptions& opts = {}) {
    std::sort(pairs.begin(), pairs.end(),
              [](const PairPaths& a, const PairPaths& b) { return a.image_id < b.image_id; });

    std::vector<detail::PairOutcome> outcomes(pairs.size());
    int threads = opts.threads;
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min<int>(threads, static_cast<int>(pairs.size())));

    if (threads <= 1) {
        for (size_t i = 0; i < pairs.size(); ++i)
            outcomes[i] = detail::evaluate_one(pairs[i], opts);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&]() {
                for (size_t i = next.fetch_add(1); i < pairs.size(); i = next.fetch_add(1))
                    outcomes[i] = detail::evaluate_one(pairs[i], opts);
            });
        }
        for (auto& th : pool) th.join();
    }

    MetricReport report;
    for (size_t i = 0; i < pairs.size(); ++i) {
        if (outcomes[i].failed)
            report.failures.push_back({pairs[i].image_id, outcomes[i].error});
        else
            report.images.push_back({pairs[i].image_id, outcomes[i].metrics});
    }
    report.aggregate = aggregate_entries(report.images);
    return report;
}

/// Pair gt/pred (and optional ignore) directories by filename stem.
/// Unpaired files become failures rather than being silently skipped.
inline std::pair<std::vector<PairPaths>, std::vector<FailureEntry>> pair_directories(
    const std::string& gt_dir, const std::string& pred_dir,
    const std::optional<std::string>& ignore_dir = std::nullopt) {
    namespace fs = std::filesystem;
    const auto scan = [](const std::string& dir) {
        std::map<std::string, std::string> stems;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            const fs::path p = entry.path();
            if (p.extension() != ".png") continue;
            stems[p.stem().string()] = p.string();
        }
        return stems;
    };
    const auto gt = scan(gt_dir);
    const auto pred = scan(pred_dir);
    std::map<std::string, std::string> ignore;
    if (ignore_dir) ignore = scan(*ignore_dir);

    std::vector<PairPaths> pairs;
    std::vector<FailureEntry> failures;
    for (const auto& [stem, gt_path] : gt) {
        const auto it = pred.find(stem);
        if (it == pred.end()) {
            failures.push_back({stem, "no prediction for ground-truth file " + gt_path});
            continue;
        }
        PairPaths p{stem, gt_path, it->second, std::nullopt};
        const auto ig = ignore.find(stem);
        if (ig != ignore.end()) p.ignore_path = ig->second;
        pairs.push_back(std::move(p));
    }
    for (const auto& [stem, pred_path] : pred)
        if (gt.find(stem) == gt.end())
            failures.push_back({stem, "no ground truth for prediction file " + pred_path});
    return {pairs, failures};
}

}  // namespace cellseg
