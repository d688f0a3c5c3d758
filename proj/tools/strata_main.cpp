#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "strata/attention.hpp"
#include "strata/flops.hpp"
#include "strata/io.hpp"
#include "strata/latent.hpp"
#include "strata/mask.hpp"
#include "strata/mesh.hpp"
#include "strata/metrics.hpp"
#include "strata/rope.hpp"
#include "strata/sampling.hpp"
#include "strata/version.hpp"

namespace fs = std::filesystem;
using strata::json;

namespace {

std::vector<int> parse_int_list(const std::string& text, const char* what) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        int v = 0;
        try {
            v = std::stoi(item, &pos);
        } catch (const std::exception&) {
            pos = std::string::npos;
        }
        if (pos != item.size()) {
            throw std::invalid_argument(std::string(what) + ": bad list entry '" + item + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw std::invalid_argument(std::string(what) + ": empty list");
    }
    return out;
}

// "--calibrate-total 0.438@16"
strata::Calibration parse_calibration(const std::string& text) {
    const auto at = text.find('@');
    if (at == std::string::npos) {
        throw std::invalid_argument("calibration must look like RATIO@FRAMES, e.g. 0.438@16");
    }
    strata::Calibration cal;
    try {
        cal.ratio_total = std::stod(text.substr(0, at));
        cal.frames = std::stoi(text.substr(at + 1));
    } catch (const std::exception&) {
        throw std::invalid_argument("calibration must look like RATIO@FRAMES, e.g. 0.438@16");
    }
    return cal;
}

// relative output paths land in $STRATA_OUT_DIR when it is set
std::string resolve_out(const std::string& path) {
    if (path.empty()) return path;
    const char* base = std::getenv("STRATA_OUT_DIR");
    if (base == nullptr || *base == '\0' || fs::path(path).is_absolute()) return path;
    return (fs::path(base) / path).string();
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    out << body;
    if (!out) {
        throw std::runtime_error("write failed for '" + path + "'");
    }
}

json report_base(json config, std::uint64_t seed) {
    json doc;
    doc["config"] = std::move(config);
    doc["seed"] = seed;
    doc["version"] = strata::kVersion;
    return doc;
}

// ---------------------------------------------------------------- mask ----

struct MaskArgs {
    int frames = 16;
    int tokens = 4096;
    int block = 128;
    std::string variant = "ours";
    std::string schedule;
    std::string render_path;
    std::string report_path;
};

int run_mask(const MaskArgs& args) {
    auto variant = strata::MaskVariant::parse(args.variant);
    if (!args.schedule.empty()) {
        variant = variant.with_schedule(
            strata::StrideSchedule::make(parse_int_list(args.schedule, "schedule")));
    }
    const auto grid = strata::GridSpec::make(args.frames, args.tokens, args.block);
    const auto mask = strata::build_block_mask(grid, variant);
    const double dens = strata::density(mask);

    json config;
    config["frames"] = args.frames;
    config["tokens"] = args.tokens;
    config["block"] = args.block;
    config["variant"] = variant.name();
    config["schedule"] = variant.schedule.strides;
    config["render"] = args.render_path;
    config["report"] = args.report_path;

    json doc = report_base(config, 0);
    doc["T"] = args.frames;
    doc["P"] = args.tokens;
    doc["S_B"] = args.block;
    doc["variant"] = variant.name();
    doc["schedule"] = variant.schedule.strides;
    doc["density"] = strata::sig9(dens);
    json pairs = json::array();
    for (int i = 0; i < args.frames; ++i) {
        json row = json::array();
        for (int j = 0; j < args.frames; ++j) {
            row.push_back(strata::sig9(strata::frame_pair_density(mask, i, j)));
        }
        pairs.push_back(std::move(row));
    }
    doc["per_frame_pair"] = std::move(pairs);

    if (!args.render_path.empty()) {
        strata::render_mask(mask, resolve_out(args.render_path));
    }
    const std::string body = doc.dump(2) + "\n";
    if (!args.report_path.empty()) {
        write_text(resolve_out(args.report_path), body);
    }
    std::cout << body;
    return 0;
}

// --------------------------------------------------------------- flops ----

struct FlopsArgs {
    std::string frames = "8,16,32";
    std::string variant = "ours";
    std::string schedule;
    std::string calibrate;
    std::string out_path;
};

int run_flops(const FlopsArgs& args) {
    auto variant = strata::MaskVariant::parse(args.variant);
    if (!args.schedule.empty()) {
        variant = variant.with_schedule(
            strata::StrideSchedule::make(parse_int_list(args.schedule, "schedule")));
    }
    const auto frames = parse_int_list(args.frames, "frames");
    std::optional<strata::Calibration> cal;
    if (!args.calibrate.empty()) {
        cal = parse_calibration(args.calibrate);
    }
    const strata::ArchConfig arch;
    const auto points = strata::predict_scaling(arch, variant, frames, cal);

    std::string csv = "T,density,ratio_attn,ratio_total_model,ratio_total_calibrated\n";
    for (const auto& pt : points) {
        csv += std::to_string(pt.frames) + "," + strata::format_sig9(pt.density) + "," +
               strata::format_sig9(pt.ratio_attn) + "," + strata::format_sig9(pt.ratio_total) +
               "," +
               (pt.ratio_total_calibrated ? strata::format_sig9(*pt.ratio_total_calibrated) : "") +
               "\n";
    }
    if (!args.out_path.empty()) {
        write_text(resolve_out(args.out_path), csv);
    }
    std::cout << csv;
    return 0;
}

// ----------------------------------------------------------- attn-check ----

struct AttnCheckArgs {
    int frames = 4;
    int tokens = 64;
    int block = 16;
    std::string variant = "ours";
    int seeds = 10;
    double tolerance = 1e-5;
    int heads = 2;
    int head_dim = 8;
    std::uint64_t seed = 0;
    std::string report_path;
};

int run_attn_check(const AttnCheckArgs& args) {
    const auto variant = strata::MaskVariant::parse(args.variant);
    const auto grid = strata::GridSpec::make(args.frames, args.tokens, args.block);
    const auto mask = strata::build_block_mask(grid, variant);
    const auto token_mask = strata::expand_to_token_mask(mask);
    const auto rope = strata::build_rope_table(args.head_dim, 10000.0, args.frames);

    double max_rel_err = 0.0;
    int seeds_passed = 0;
    for (int s = 0; s < args.seeds; ++s) {
        strata::Rng prng(args.seed + 2 * s);
        const auto params = strata::AttentionParams::random(args.heads, args.head_dim, prng);
        strata::Rng xrng(args.seed + 2 * s + 1);
        const auto x = strata::TokenTensor::random(args.frames, args.tokens,
                                                   args.heads * args.head_dim, xrng);
        const auto dense = strata::dense_masked_mha(x, params, token_mask, &rope);
        const auto sparse = strata::block_sparse_mha(x, params, mask, &rope);
        double err = 0.0;
        for (std::size_t i = 0; i < dense.data.size(); ++i) {
            err = std::max(err, std::abs(sparse.data[i] - dense.data[i]) /
                                    (1.0 + std::abs(dense.data[i])));
        }
        max_rel_err = std::max(max_rel_err, err);
        seeds_passed += err < args.tolerance ? 1 : 0;
    }

    json config;
    config["frames"] = args.frames;
    config["tokens"] = args.tokens;
    config["block"] = args.block;
    config["variant"] = variant.name();
    config["seeds"] = args.seeds;
    config["tolerance"] = args.tolerance;
    config["heads"] = args.heads;
    config["head_dim"] = args.head_dim;
    json doc = report_base(config, args.seed);
    doc["max_rel_err"] = strata::sig9(max_rel_err);
    doc["seeds_passed"] = seeds_passed;

    const std::string body = doc.dump(2) + "\n";
    if (!args.report_path.empty()) {
        write_text(resolve_out(args.report_path), body);
    }
    std::cout << body;
    return seeds_passed == args.seeds ? 0 : 1;
}

// ---------------------------------------------------------------- rope ----

struct RopeArgs {
    int head_dim = 128;
    double base = 10000.0;
    int frames = 16;
    std::string dump_path;
};

int run_rope(const RopeArgs& args) {
    const auto table = strata::build_rope_table(args.head_dim, args.base, args.frames);
    if (!args.dump_path.empty()) {
        std::ofstream out(resolve_out(args.dump_path));
        if (!out) {
            throw std::runtime_error("cannot open '" + args.dump_path + "' for writing");
        }
        strata::dump_rope_table_csv(table, out);
    } else {
        strata::dump_rope_table_csv(table, std::cout);
    }
    return 0;
}

// -------------------------------------------------------------- sample ----

struct SampleArgs {
    std::string manifest;
    int uniform = 1024;
    int sharp = 1024;
    int fps = 0;
    double sharp_threshold_deg = 30.0;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

int run_sample(const SampleArgs& args) {
    const auto manifest = strata::load_manifest(args.manifest);
    const auto rest = strata::load_obj(manifest.rest);

    std::vector<strata::SurfaceSample> samples =
        strata::sample_uniform(rest, args.uniform, args.seed);
    if (args.sharp > 0) {
        const auto edges = strata::detect_sharp_edges(rest, args.sharp_threshold_deg);
        if (edges.empty()) {
            std::cerr << "warning: no sharp edges at " << args.sharp_threshold_deg
                      << " deg, skipping sharp samples\n";
        } else {
            const auto sharp = strata::sample_sharp(rest, edges, args.sharp, args.seed + 1);
            samples.insert(samples.end(), sharp.begin(), sharp.end());
        }
    }

    strata::TrackedPointSequence seq;
    seq.provenance = samples;
    for (const auto& frame : manifest.frames) {
        const auto deformed = strata::load_obj(frame.deformed);
        const auto watertight = strata::load_obj(frame.watertight);
        const auto rep = strata::check_watertight(watertight);
        if (!rep.watertight) {
            std::cerr << "warning: '" << frame.watertight << "' is not watertight ("
                      << rep.boundary_edges << " boundary edges, " << rep.non_manifold_edges
                      << " non-manifold edges)\n";
        }
        const auto guide = strata::propagate(samples, rest, deformed);
        const auto projected = strata::project_to_surface(guide.positions, watertight);
        strata::TrackedFrame tracked;
        tracked.positions.reserve(projected.size());
        tracked.normals.reserve(projected.size());
        for (const auto& s : projected) {
            tracked.positions.push_back(s.position);
            tracked.normals.push_back(s.normal);
        }
        seq.frames.push_back(std::move(tracked));
    }

    auto normalized = strata::normalize_sequence(seq);
    if (args.fps > 0) {
        normalized.sequence.fps_indices = strata::farthest_point_sampling(
            normalized.sequence.frames.front().positions, args.fps, args.seed + 2);
    }

    const fs::path out_dir = resolve_out(args.out_dir);
    fs::create_directories(out_dir);
    char name[64];
    for (std::size_t f = 0; f < normalized.sequence.frames.size(); ++f) {
        std::snprintf(name, sizeof(name), "frame_%03zu.bin", f);
        strata::write_point_cloud_bin((out_dir / name).string(),
                                      normalized.sequence.frames[f].positions,
                                      normalized.sequence.frames[f].normals);
    }

    json header;
    header["n"] = normalized.sequence.frames.front().positions.size();
    header["frames"] = normalized.sequence.frames.size();
    header["fields"] = json::array({"x", "y", "z", "nx", "ny", "nz"});
    write_text((out_dir / "header.json").string(), header.dump(2) + "\n");

    if (args.fps > 0) {
        json idx = normalized.sequence.fps_indices;
        write_text((out_dir / "fps_indices.json").string(), idx.dump() + "\n");
    }

    json config;
    config["manifest"] = args.manifest;
    config["uniform"] = args.uniform;
    config["sharp"] = args.sharp;
    config["fps"] = args.fps;
    config["sharp_threshold_deg"] = args.sharp_threshold_deg;
    config["out"] = args.out_dir;
    json doc = report_base(config, args.seed);
    doc["points_per_frame"] = normalized.sequence.frames.front().positions.size();
    doc["frames"] = normalized.sequence.frames.size();
    doc["center"] = json::array({strata::sig9(normalized.center.x),
                                 strata::sig9(normalized.center.y),
                                 strata::sig9(normalized.center.z)});
    doc["scale"] = strata::sig9(normalized.scale);
    const std::string body = doc.dump(2) + "\n";
    write_text((out_dir / "report.json").string(), body);
    std::cout << body;
    return 0;
}

// ------------------------------------------------------------- metrics ----

struct MetricsArgs {
    std::string pred;
    std::string gt;
    std::string mesh_pred;
    std::string mesh_gt;
    int iou_res = 64;
    double tau = 0.05;
    bool squared = false;
    std::string report_path;
};

int run_metrics(const MetricsArgs& args) {
    const auto pred = strata::read_point_cloud(args.pred);
    const auto gt = strata::read_point_cloud(args.gt);
    const double chamfer = strata::chamfer_distance(pred, gt, args.squared);
    const double fscore = strata::f_score(pred, gt, args.tau);

    std::optional<double> iou;
    if (!args.mesh_pred.empty() || !args.mesh_gt.empty()) {
        if (args.mesh_pred.empty() || args.mesh_gt.empty()) {
            throw std::invalid_argument("metrics: --mesh-pred and --mesh-gt must come together");
        }
        const auto mesh_pred = strata::load_obj(args.mesh_pred);
        const auto mesh_gt = strata::load_obj(args.mesh_gt);
        iou = strata::voxel_iou(mesh_pred, mesh_gt, args.iou_res);
    }

    json config;
    config["pred"] = args.pred;
    config["gt"] = args.gt;
    config["mesh_pred"] = args.mesh_pred;
    config["mesh_gt"] = args.mesh_gt;
    config["iou_res"] = args.iou_res;
    config["tau"] = args.tau;
    config["squared"] = args.squared;
    json doc = report_base(config, 0);
    doc["chamfer"] = strata::sig9(chamfer);
    doc["fscore"] = strata::sig9(fscore);
    if (iou) {
        doc["iou"] = strata::sig9(*iou);
    }
    const std::string body = doc.dump(2) + "\n";
    if (!args.report_path.empty()) {
        write_text(resolve_out(args.report_path), body);
    }
    std::cout << body;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"block-sparse spatiotemporal attention toolkit"};
    app.require_subcommand(1);

    MaskArgs mask_args;
    auto* mask_cmd = app.add_subcommand("mask", "build and inspect block-sparse attention masks");
    mask_cmd->add_option("--frames", mask_args.frames, "frame count T")->capture_default_str();
    mask_cmd->add_option("--tokens", mask_args.tokens, "tokens per frame P")->capture_default_str();
    mask_cmd->add_option("--block", mask_args.block, "block size S_B")->capture_default_str();
    mask_cmd->add_option("--variant", mask_args.variant,
                         "ours|no-anchor|fixed:s|aggressive|conservative|temporal|full")
        ->capture_default_str();
    mask_cmd->add_option("--schedule", mask_args.schedule, "stride schedule, e.g. 1,1,2,4,8,16");
    mask_cmd->add_option("--render", mask_args.render_path, "write a PGM image of the mask");
    mask_cmd->add_option("--report", mask_args.report_path, "write the density report JSON");

    FlopsArgs flops_args;
    auto* flops_cmd = app.add_subcommand("flops", "analytical cost model of the 4D stack");
    flops_cmd->add_option("--frames", flops_args.frames, "frame counts, e.g. 8,16,32")
        ->capture_default_str();
    flops_cmd->add_option("--variant", flops_args.variant, "mask variant")->capture_default_str();
    flops_cmd->add_option("--schedule", flops_args.schedule, "stride schedule override");
    flops_cmd->add_option("--calibrate-total", flops_args.calibrate,
                          "calibrate the total ratio, e.g. 0.438@16");
    flops_cmd->add_option("--out", flops_args.out_path, "write the CSV here as well");

    AttnCheckArgs attn_args;
    auto* attn_cmd = app.add_subcommand("attn-check", "sparse vs dense attention equivalence");
    attn_cmd->add_option("--frames", attn_args.frames, "frame count T")->capture_default_str();
    attn_cmd->add_option("--tokens", attn_args.tokens, "tokens per frame P")->capture_default_str();
    attn_cmd->add_option("--block", attn_args.block, "block size S_B")->capture_default_str();
    attn_cmd->add_option("--variant", attn_args.variant, "mask variant")->capture_default_str();
    attn_cmd->add_option("--seeds", attn_args.seeds, "number of seeded trials")
        ->capture_default_str();
    attn_cmd->add_option("--tolerance", attn_args.tolerance, "max relative error allowed")
        ->capture_default_str();
    attn_cmd->add_option("--heads", attn_args.heads, "attention heads")->capture_default_str();
    attn_cmd->add_option("--head-dim", attn_args.head_dim, "head dimension")
        ->capture_default_str();
    attn_cmd->add_option("--seed", attn_args.seed, "base seed")->capture_default_str();
    attn_cmd->add_option("--report", attn_args.report_path, "write the JSON report here");

    RopeArgs rope_args;
    auto* rope_cmd = app.add_subcommand("rope", "temporal rotary embedding table");
    rope_cmd->add_option("--head-dim", rope_args.head_dim, "head dimension")
        ->capture_default_str();
    rope_cmd->add_option("--base", rope_args.base, "base frequency")->capture_default_str();
    rope_cmd->add_option("--frames", rope_args.frames, "frames in the table")
        ->capture_default_str();
    rope_cmd->add_option("--dump", rope_args.dump_path, "CSV path (stdout when omitted)");

    SampleArgs sample_args;
    auto* sample_cmd =
        app.add_subcommand("sample", "temporally consistent surface sampling pipeline");
    sample_cmd->add_option("--manifest", sample_args.manifest, "sequence manifest JSON")
        ->required();
    sample_cmd->add_option("--uniform", sample_args.uniform, "uniform sample count")
        ->capture_default_str();
    sample_cmd->add_option("--sharp", sample_args.sharp, "sharp-edge sample count")
        ->capture_default_str();
    sample_cmd->add_option("--fps", sample_args.fps, "FPS query count on the first frame")
        ->capture_default_str();
    sample_cmd->add_option("--sharp-threshold", sample_args.sharp_threshold_deg,
                           "dihedral threshold in degrees")
        ->capture_default_str();
    sample_cmd->add_option("--seed", sample_args.seed, "sampling seed")->capture_default_str();
    sample_cmd->add_option("--out", sample_args.out_dir, "output directory")
        ->capture_default_str();

    MetricsArgs metrics_args;
    auto* metrics_cmd = app.add_subcommand("metrics", "chamfer / f-score / voxel IoU");
    metrics_cmd->add_option("--pred", metrics_args.pred, "predicted points (.xyz or .bin)")
        ->required();
    metrics_cmd->add_option("--gt", metrics_args.gt, "reference points (.xyz or .bin)")
        ->required();
    metrics_cmd->add_option("--mesh-pred", metrics_args.mesh_pred, "predicted mesh OBJ for IoU");
    metrics_cmd->add_option("--mesh-gt", metrics_args.mesh_gt, "reference mesh OBJ for IoU");
    metrics_cmd->add_option("--iou-res", metrics_args.iou_res, "voxel resolution per axis")
        ->capture_default_str();
    metrics_cmd->add_option("--tau", metrics_args.tau, "f-score distance threshold")
        ->capture_default_str();
    metrics_cmd->add_flag("--squared", metrics_args.squared, "use squared-L2 chamfer");
    metrics_cmd->add_option("--report", metrics_args.report_path, "write the JSON report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << app.help() << "\nerror: " << e.get_name() << ": " << e.what() << "\n";
        return 2;
    }

    try {
        if (mask_cmd->parsed()) return run_mask(mask_args);
        if (flops_cmd->parsed()) return run_flops(flops_args);
        if (attn_cmd->parsed()) return run_attn_check(attn_args);
        if (rope_cmd->parsed()) return run_rope(rope_args);
        if (sample_cmd->parsed()) return run_sample(sample_args);
        if (metrics_cmd->parsed()) return run_metrics(metrics_args);
    } catch (const std::exception& e) {
        json err;
        err["error"]["type"] = "validation";
        err["error"]["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 2;
}
