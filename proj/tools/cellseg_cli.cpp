#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cellseg/dataset.hpp"
#include "cellseg/embedviz.hpp"
#include "cellseg/flows.hpp"
#include "cellseg/io/dcf1.hpp"
#include "cellseg/io/png_io.hpp"
#include "cellseg/io/report.hpp"
#include "cellseg/metrics.hpp"
#include "cellseg/pipeline.hpp"
#include "cellseg/synth.hpp"
#include "cellseg/version.hpp"

namespace fs = std::filesystem;
using namespace cellseg;

namespace {

int env_threads() {
    const char* env = std::getenv("CELLSEG_THREADS");
    if (!env || !*env) return 0;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0)
        throw std::runtime_error("CELLSEG_THREADS must be a non-negative integer");
    return static_cast<int>(v);
}

std::string fmt_score(const std::optional<double>& v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v ? *v : std::nan(""));
    return buf;
}

DetWeights parse_det_weights(const std::string& s) {
    DetWeights w;
    if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &w.w_fn, &w.w_fp, &w.w_ns) != 3)
        throw std::runtime_error("--det-weights expects three comma-separated values, e.g. 10,1,5");
    return w;
}

CropPolicy parse_crop_policy(const std::string& s) {
    if (s == "center") return CropPolicy::center();
    if (s == "topleft") return CropPolicy::top_left();
    int r = 0, c = 0;
    if (std::sscanf(s.c_str(), "%d,%d", &r, &c) == 2) return CropPolicy::at(r, c);
    throw std::runtime_error("--crop-policy expects center, topleft, or row,col");
}

struct EvaluateArgs {
    std::string gt, pred, ignore;
    double iou_tau = 0.5;
    std::string det_weights = "10,1,5";
    bool ignore_rule = false;
    std::string report_path;
    bool timestamp = false;
};

int run_evaluate(const EvaluateArgs& args) {
    EvalOptions opts;
    opts.iou_tau = args.iou_tau;
    opts.det_weights = parse_det_weights(args.det_weights);
    opts.ignore_rule = args.ignore_rule;
    opts.threads = env_threads();

    std::vector<PairPaths> pairs;
    std::vector<FailureEntry> pairing_failures;
    if (fs::is_directory(args.gt)) {
        if (!fs::is_directory(args.pred))
            throw std::runtime_error("gt is a directory but pred is not: " + args.pred);
        std::optional<std::string> ignore_dir;
        if (!args.ignore.empty()) ignore_dir = args.ignore;
        std::tie(pairs, pairing_failures) = pair_directories(args.gt, args.pred, ignore_dir);
    } else {
        if (!fs::exists(args.gt)) throw std::runtime_error("cannot read " + args.gt);
        if (!fs::exists(args.pred)) throw std::runtime_error("cannot read " + args.pred);
        PairPaths p{fs::path(args.gt).stem().string(), args.gt, args.pred, std::nullopt};
        if (!args.ignore.empty()) p.ignore_path = args.ignore;
        pairs.push_back(std::move(p));
    }

    MetricReport report = evaluate_dataset(std::move(pairs), opts);
    for (auto& f : pairing_failures) report.failures.push_back(std::move(f));
    std::sort(report.failures.begin(), report.failures.end(),
              [](const FailureEntry& a, const FailureEntry& b) {
                  return a.image_id != b.image_id ? a.image_id < b.image_id : a.error < b.error;
              });

    std::printf("SEG=%s DET=%s MMA=%s\n", fmt_score(report.aggregate.seg).c_str(),
                fmt_score(report.aggregate.det).c_str(), fmt_score(report.aggregate.mma).c_str());

    if (!args.report_path.empty()) {
        const ReportConfig config{opts.iou_tau, opts.det_weights, opts.ignore_rule};
        write_report(report, config, args.report_path, args.timestamp);
    }
    if (!report.failures.empty()) {
        std::fprintf(stderr, "error: %zu image pair(s) failed evaluation (first: %s: %s)\n",
                     report.failures.size(), report.failures[0].image_id.c_str(),
                     report.failures[0].error.c_str());
        return 1;
    }
    return 0;
}

IgnoreRegion ignore_from_png(const std::string& path) {
    const LabelMask m = read_label_png(path);
    IgnoreRegion r(m.height, m.width);
    for (size_t i = 0; i < m.size(); ++i) r.mask[i] = m.labels[i] != 0 ? 1 : 0;
    return r;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cellseg: instance-segmentation metrics, flow objectives, and image pipeline"};
    app.set_version_flag("--version", std::string("cellseg ") + kToolVersion);
    app.require_subcommand(1);

    // ---- evaluate ----
    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "Compute SEG/DET/MMA for mask pairs");
    evaluate->add_option("gt", ev.gt, "Ground-truth mask PNG or directory")->required();
    evaluate->add_option("pred", ev.pred, "Predicted mask PNG or directory")->required();
    evaluate->add_option("ignore", ev.ignore, "Ignore-region mask PNG or directory");
    evaluate->add_option("--iou-tau", ev.iou_tau, "IoU threshold for SEG matching");
    evaluate->add_option("--det-weights", ev.det_weights, "DET costs w_fn,w_fp,w_ns");
    evaluate->add_flag("--ignore-rule", ev.ignore_rule, "Apply evaluation-time ignore masking");
    evaluate->add_option("--report", ev.report_path, "Write a JSON report to this path");
    evaluate->add_flag("--timestamp", ev.timestamp, "Embed a timestamp in the report");

    // ---- flows ----
    auto* flows = app.add_subcommand("flows", "Flow-objective encoding and decoding");
    flows->require_subcommand(1);
    std::string enc_in, enc_out;
    auto* encode = flows->add_subcommand("encode", "Label mask PNG -> flow field DCF1");
    encode->add_option("mask", enc_in, "Input label mask PNG")->required();
    encode->add_option("-o,--output", enc_out, "Output DCF1 path")->required();

    std::string dec_in, dec_out;
    DecodeParams dec_params;
    auto* decode = flows->add_subcommand("decode", "Flow field DCF1 -> label mask PNG");
    decode->add_option("field", dec_in, "Input DCF1 field")->required();
    decode->add_option("-o,--output", dec_out, "Output label mask PNG")->required();
    decode->add_option("--threshold", dec_params.cellprob_threshold, "Cell probability cutoff");
    decode->add_option("--min-size", dec_params.min_size, "Minimum instance pixel count");
    decode->add_option("--steps", dec_params.n_steps, "Euler integration steps");
    decode->add_option("--step-size", dec_params.step_size, "Euler step length in pixels");

    // ---- loss ----
    std::string loss_pred, loss_target, loss_mask;
    double loss_w_ignore = 0.05;
    auto* loss = app.add_subcommand("loss", "Ignore-masked MSE between two objective fields");
    loss->add_option("pred", loss_pred, "Predicted field DCF1")->required();
    loss->add_option("target", loss_target, "Target field DCF1")->required();
    loss->add_option("mask", loss_mask, "Label mask PNG defining labeled pixels")->required();
    loss->add_option("--ignore-weight", loss_w_ignore, "Weight for unlabeled pixels");

    // ---- preprocess ----
    std::string prep_in, prep_out, prep_policy = "center";
    auto* preprocess = app.add_subcommand("preprocess", "CLAHE, z-score, crop, upsample");
    preprocess->add_option("image", prep_in, "Input grayscale PNG")->required();
    preprocess->add_option("-o,--output", prep_out,
                           "Output path (.png rescaled, .dcf1 raw floats)")->required();
    preprocess->add_option("--crop-policy", prep_policy, "center | topleft | row,col");

    // ---- cropselect ----
    std::string cs_in, cs_out;
    int cs_patch = 1024, cs_stride = 128;
    auto* cropselect = app.add_subcommand("cropselect",
                                          "Pick the densest patch by Laplacian variance");
    cropselect->add_option("image", cs_in, "Input grayscale PNG")->required();
    cropselect->add_option("--patch", cs_patch, "Patch size in pixels");
    cropselect->add_option("--stride", cs_stride, "Window stride in pixels");
    cropselect->add_option("-o,--output", cs_out, "Optional cropped PNG output");

    // ---- tiles ----
    auto* tiles = app.add_subcommand("tiles", "Sliding-window planning and stitching");
    tiles->require_subcommand(1);
    int plan_h = 0, plan_w = 0, plan_crop = 512, plan_overlap = 128;
    auto* plan_cmd = tiles->add_subcommand("plan", "Print window offsets, one 'row col' per line");
    plan_cmd->add_option("height", plan_h, "Image height")->required();
    plan_cmd->add_option("width", plan_w, "Image width")->required();
    plan_cmd->add_option("--crop", plan_crop, "Tile size");
    plan_cmd->add_option("--overlap", plan_overlap, "Tile overlap");

    int st_h = 0, st_w = 0, st_crop = 512, st_overlap = 128;
    std::string st_out;
    std::vector<std::string> st_tiles;
    auto* stitch_cmd = tiles->add_subcommand("stitch", "Average overlapping tile fields");
    stitch_cmd->add_option("--height", st_h, "Output height")->required();
    stitch_cmd->add_option("--width", st_w, "Output width")->required();
    stitch_cmd->add_option("--crop", st_crop, "Tile size");
    stitch_cmd->add_option("--overlap", st_overlap, "Tile overlap");
    stitch_cmd->add_option("-o,--output", st_out, "Output DCF1 path")->required();
    stitch_cmd->add_option("tiles", st_tiles, "Tile DCF1 files in plan (row-major) order")
        ->required();

    // ---- pcaviz ----
    std::string pv_in, pv_out;
    double pv_clamp = 2.5;
    std::vector<int> pv_size;
    auto* pcaviz = app.add_subcommand("pcaviz", "Project patch embeddings to an RGB image");
    pcaviz->add_option("embeddings", pv_in, "Embeddings DCF1 (channels = dim)")->required();
    pcaviz->add_option("-o,--output", pv_out, "Output RGB PNG")->required();
    pcaviz->add_option("--clamp", pv_clamp, "Clamp in standard deviations");
    pcaviz->add_option("--out-size", pv_size, "Nearest-neighbor upsample to H W")
        ->expected(2);

    // ---- synth ----
    SynthSpec synth_spec;
    std::string synth_mask_out, synth_image_out;
    double synth_fg = 0.7, synth_bg = 0.3, synth_noise = 0.05;
    uint64_t synth_image_seed = 1;
    auto* synth = app.add_subcommand("synth", "Generate synthetic instance fixtures");
    synth->add_option("--seed", synth_spec.seed, "Placement seed");
    synth->add_option("--height", synth_spec.height, "Canvas height");
    synth->add_option("--width", synth_spec.width, "Canvas width");
    synth->add_option("--n", synth_spec.n_instances, "Instance count");
    synth->add_option("--rmin", synth_spec.radius_min, "Minimum semi-minor radius");
    synth->add_option("--rmax", synth_spec.radius_max, "Maximum semi-minor radius");
    synth->add_option("--gap", synth_spec.min_gap, "Minimum boundary gap");
    synth->add_option("--ecc-min", synth_spec.ecc_min, "Minimum eccentricity");
    synth->add_option("--ecc-max", synth_spec.ecc_max, "Maximum eccentricity");
    synth->add_option("--mask-out", synth_mask_out, "Label mask PNG output")->required();
    synth->add_option("--image-out", synth_image_out, "Rendered image PNG output");
    synth->add_option("--fg", synth_fg, "Foreground intensity");
    synth->add_option("--bg", synth_bg, "Background intensity");
    synth->add_option("--noise", synth_noise, "Gaussian noise sigma");
    synth->add_option("--image-seed", synth_image_seed, "Noise seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*evaluate) return run_evaluate(ev);

        if (*encode) {
            write_dcf1(masks_to_flows(read_label_png(enc_in)).to_planar(), enc_out);
            return 0;
        }
        if (*decode) {
            const ObjectiveField field = ObjectiveField::from_planar(read_dcf1(dec_in));
            write_label_png(flows_to_masks(field, dec_params), dec_out);
            return 0;
        }
        if (*loss) {
            const ObjectiveField pred = ObjectiveField::from_planar(read_dcf1(loss_pred));
            const ObjectiveField target = ObjectiveField::from_planar(read_dcf1(loss_target));
            const WeightMask wm = make_weight_mask(read_label_png(loss_mask), loss_w_ignore);
            std::printf("%.9f\n", ignore_masked_loss(pred, target, wm));
            return 0;
        }
        if (*preprocess) {
            const ImageGrid out = prepare_input(read_image_png(prep_in),
                                                parse_crop_policy(prep_policy));
            if (fs::path(prep_out).extension() == ".dcf1") {
                PlanarField f(1, out.height, out.width);
                f.data = out.data;
                write_dcf1(f, prep_out);
            } else {
                // z-scored values are unbounded; rescale into [0,1] for PNG
                float lo = out.data[0], hi = out.data[0];
                for (float v : out.data) {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                ImageGrid scaled(out.height, out.width);
                if (hi > lo)
                    for (size_t i = 0; i < out.size(); ++i)
                        scaled.data[i] = (out.data[i] - lo) / (hi - lo);
                write_image_png(scaled, prep_out, 16);
            }
            return 0;
        }
        if (*cropselect) {
            const ImageGrid img = read_image_png(cs_in);
            const auto [r, c] = laplacian_crop_select(img, cs_patch, cs_stride);
            std::printf("%d %d\n", r, c);
            if (!cs_out.empty()) {
                ImageGrid crop(cs_patch, cs_patch);
                for (int y = 0; y < cs_patch; ++y)
                    for (int x = 0; x < cs_patch; ++x) crop.at(y, x) = img.at(r + y, c + x);
                write_image_png(crop, cs_out, 16);
            }
            return 0;
        }
        if (*plan_cmd) {
            const TilePlan plan = plan_tiles(plan_h, plan_w, plan_crop, plan_overlap);
            for (const auto& [r, c] : plan.windows) std::printf("%d %d\n", r, c);
            return 0;
        }
        if (*stitch_cmd) {
            const TilePlan plan = plan_tiles(st_h, st_w, st_crop, st_overlap);
            if (st_tiles.size() != plan.windows.size())
                throw std::runtime_error("expected " + std::to_string(plan.windows.size()) +
                                         " tiles for this plan, got " +
                                         std::to_string(st_tiles.size()));
            std::vector<Tile> loaded;
            for (size_t i = 0; i < st_tiles.size(); ++i)
                loaded.push_back({plan.windows[i].first, plan.windows[i].second,
                                  read_dcf1(st_tiles[i])});
            write_dcf1(stitch(loaded, plan, st_h, st_w), st_out);
            return 0;
        }
        if (*pcaviz) {
            const PatchEmbeddings emb = PatchEmbeddings::from_planar(read_dcf1(pv_in));
            RgbImage img = pca_rgb(emb, pv_clamp);
            if (!pv_size.empty()) img = upsample_nearest(img, pv_size[0], pv_size[1]);
            write_rgb_png(img, pv_out);
            return 0;
        }
        if (*synth) {
            const LabelMask mask = gen_instances(synth_spec);
            write_label_png(mask, synth_mask_out);
            if (!synth_image_out.empty())
                write_image_png(render_image(mask, synth_fg, synth_bg, synth_noise,
                                             synth_image_seed),
                                synth_image_out, 16);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
