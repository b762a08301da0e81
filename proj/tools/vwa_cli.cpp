// Command-line front end: cost sweeps with analytic/measured comparison,
// ERF heatmap generation, invariant check suites, and a full decoder demo on
// synthetic features. Exit codes: 0 success, 1 check failure, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vwa/analysis.hpp"
#include "vwa/attention.hpp"
#include "vwa/cost_model.hpp"
#include "vwa/tensor_io.hpp"
#include "vwa/vwformer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vwa;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int log_level() {
    const char* env = std::getenv("VWA_LOG");
    return env ? std::atoi(env) : 0;
}

void log(int level, const std::string& msg) {
    if (log_level() >= level) std::cerr << "[vwa] " << msg << "\n";
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    bool force = false;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "JSON config file");
    cmd->add_option("--out", o.out_dir, "output directory (created if absent)");
    cmd->add_option("--seed", o.seed, "seed for all randomized behavior");
    cmd->add_flag("--force", o.force, "overwrite existing output files");
    cmd->add_option("--set", o.overrides, "dotted-key config override, e.g. attn.R=4")->take_all();
}

json load_config(const CommonOpts& o, json defaults) {
    json cfg = std::move(defaults);
    if (!o.config_path.empty()) {
        std::ifstream f(o.config_path);
        if (!f) throw UsageError("cannot open config " + o.config_path);
        json file_cfg = json::parse(f, nullptr, true, true);
        cfg.merge_patch(file_cfg);
    }
    for (const std::string& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("override '" + kv + "' is not key=value");
        const std::string key = kv.substr(0, eq), raw = kv.substr(eq + 1);
        json* node = &cfg;
        std::size_t start = 0;
        while (true) {
            const auto dot = key.find('.', start);
            const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
            if (part.empty()) throw UsageError("override key '" + key + "' has an empty segment");
            if (dot == std::string::npos) {
                json value;
                try {
                    value = json::parse(raw);
                } catch (const json::parse_error&) {
                    value = raw;
                }
                (*node)[part] = value;
                break;
            }
            node = &(*node)[part];
            start = dot + 1;
        }
    }
    return cfg;
}

fs::path prepare_output(const CommonOpts& o, const std::string& file) {
    fs::create_directories(o.out_dir);
    fs::path p = fs::path(o.out_dir) / file;
    if (fs::exists(p) && !o.force) throw UsageError(p.string() + " exists; pass --force to overwrite");
    return p;
}

PadMode parse_pad(const std::string& s) {
    if (s == "csp" || s == "copy-shift") return PadMode::CopyShift;
    if (s == "zero") return PadMode::Zero;
    throw UsageError("unknown pad mode '" + s + "'");
}

std::vector<std::size_t> as_size_list(const json& j) {
    if (j.is_array()) return j.get<std::vector<std::size_t>>();
    return {j.get<std::size_t>()};
}

// ---------------------------------------------------------------------------
// cost
// ---------------------------------------------------------------------------

int cmd_cost(const CommonOpts& opts) {
    json cfg = load_config(opts, json{{"variants", {"ga", "lwa", "vwa-norescale", "vwa-predopepe"}},
                                      {"H", {16, 32}},
                                      {"C", {16, 64}},
                                      {"P", {2, 4}},
                                      {"R", {1, 2, 4, 8}},
                                      {"heads", 8},
                                      {"pad", "csp"},
                                      {"measure_only", false}});
    const bool measure_only = cfg.at("measure_only").get<bool>();
    const PadMode pad = parse_pad(cfg.at("pad").get<std::string>());
    const std::size_t heads = cfg.at("heads").get<std::size_t>();

    struct Cell {
        Variant variant;
        Geometry geom;
    };
    std::vector<Cell> cells;
    std::set<std::string> seen;
    for (const auto& vname : cfg.at("variants")) {
        const Variant v = parse_variant(vname.get<std::string>());
        for (std::size_t H : as_size_list(cfg.at("H")))
            for (std::size_t W : cfg.contains("W") ? as_size_list(cfg.at("W")) : std::vector<std::size_t>{H})
                for (std::size_t C : as_size_list(cfg.at("C")))
                    for (std::size_t P : as_size_list(cfg.at("P")))
                        for (std::size_t R : as_size_list(cfg.at("R"))) {
                            Geometry g{H, W, C, uses_window(v) ? P : 1, uses_ratio(v) ? R : 1, heads};
                            if (!variant_config_issue(v, g).empty()) continue;
                            const std::string key = variant_name(v) + "/" + std::to_string(g.H) + "x" +
                                                    std::to_string(g.W) + "/" + std::to_string(g.C) + "/" +
                                                    std::to_string(g.P) + "/" + std::to_string(g.R);
                            if (!seen.insert(key).second) continue;
                            cells.push_back({v, g});
                        }
    }
    if (cells.empty()) throw UsageError("cost sweep grid is empty");

    const fs::path csv_path = prepare_output(opts, "cost.csv");
    const fs::path json_path = prepare_output(opts, "cost.json");

    std::ofstream csv(csv_path);
    csv << "variant,H,W,C,P,R,heads";
    if (!measure_only)
        csv << ",analytic_macs_linear,analytic_macs_attention,analytic_mem_linear_elems,analytic_mem_attn_elems";
    csv << ",measured_macs_linear,measured_macs_attention,measured_mem_linear_elems,measured_mem_attn_elems";
    if (!measure_only) csv << ",diff_macs_linear,diff_macs_attention,diff_mem_linear_elems,diff_mem_attn_elems";
    csv << ",linear_ratio_vs_lwa\n";

    json rows = json::array();
    bool all_exact = true;
    for (const Cell& cell : cells) {
        log(1, "measuring " + variant_name(cell.variant) + " H=" + std::to_string(cell.geom.H) +
                   " C=" + std::to_string(cell.geom.C) + " P=" + std::to_string(cell.geom.P) +
                   " R=" + std::to_string(cell.geom.R));
        const CostReport measured = measure_variant(cell.variant, cell.geom, pad, opts.seed);
        std::optional<CostReport> analytic_report;
        if (!measure_only) analytic_report = analytic(cell.variant, cell.geom);
        // reference LWA linear MACs are 4 HW C^2, independent of P
        const std::uint64_t lwa_linear = 4ull * cell.geom.H * cell.geom.W * cell.geom.C * cell.geom.C;
        const double ratio = static_cast<double>(measured.macs_linear) / static_cast<double>(lwa_linear);

        json row;
        row["variant"] = variant_name(cell.variant);
        row["config"] = cell.geom;
        row["measured"] = measured;
        csv << variant_name(cell.variant) << "," << cell.geom.H << "," << cell.geom.W << "," << cell.geom.C << ","
            << cell.geom.P << "," << cell.geom.R << "," << cell.geom.heads;
        if (analytic_report) {
            csv << "," << analytic_report->macs_linear << "," << analytic_report->macs_attention << ","
                << analytic_report->mem_linear_elems << "," << analytic_report->mem_attn_elems;
        }
        csv << "," << measured.macs_linear << "," << measured.macs_attention << "," << measured.mem_linear_elems
            << "," << measured.mem_attn_elems;
        if (analytic_report) {
            const CostDiff diff = compare(measured, *analytic_report);
            row["analytic"] = *analytic_report;
            row["diff"] = diff;
            if (!diff.all_zero()) all_exact = false;
            csv << "," << diff.macs_linear << "," << diff.macs_attention << "," << diff.mem_linear_elems << ","
                << diff.mem_attn_elems;
        }
        row["linear_ratio_vs_lwa"] = ratio;
        csv << "," << ratio << "\n";
        rows.push_back(row);
    }
    std::ofstream(json_path) << json{{"rows", rows}, {"all_exact", all_exact}}.dump(2) << "\n";
    std::cout << cells.size() << " sweep cells -> " << csv_path.string() << "\n";
    if (!measure_only && !all_exact) {
        std::cout << "measured/analytic mismatch detected\n";
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// erf
// ---------------------------------------------------------------------------

int cmd_erf(const CommonOpts& opts, const std::string& model_spec, std::size_t size, std::size_t channels,
            std::size_t window, std::size_t heads, std::vector<std::size_t> query, std::size_t samples,
            const std::string& pad, bool structured) {
    if (query.empty()) query = {size / 2, size / 2};
    if (query.size() != 2) throw UsageError("--query needs row col");
    const PadMode pad_mode = parse_pad(pad);

    ErfModel model;
    Shape input_shape{channels, size, size};
    std::string tag = model_spec;
    try {
        if (model_spec == "short") {
            model = erf_model_short(channels, opts.seed);
        } else if (model_spec == "ga") {
            model = erf_model_ga(channels, heads, opts.seed);
        } else if (model_spec == "lwa") {
            model = erf_model_lwa(channels, window, heads, opts.seed);
        } else if (model_spec.rfind("vwa:", 0) == 0) {
            const std::size_t R = std::stoul(model_spec.substr(4));
            AttnConfig cfg{channels, window, R, heads, pad_mode, RescaleStrategy::PreDopePe};
            cfg.validate();
            model = erf_model_vwa(cfg, opts.seed);
            tag = "vwa-r" + std::to_string(R);
        } else if (model_spec == "vwformer-stage") {
            VWFormerConfig cfg = VWFormerConfig::efficient(2);
            cfg.agg_channels = channels;
            cfg.heads = heads;
            cfg.pad_mode = pad_mode;
            cfg.validate();
            model = erf_model_vwformer_stage(cfg, opts.seed);
        } else {
            throw UsageError("unknown model spec '" + model_spec + "' (short, lwa, vwa:R, ga, vwformer-stage)");
        }
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }

    InputSampler sampler;
    if (structured) {
        const std::size_t S = size, C = channels;
        sampler = [S, C](std::size_t, std::mt19937_64& rng) {
            const double cy = (0.2 + 0.6 * detail::canonical(rng)) * static_cast<double>(S);
            const double cx = (0.2 + 0.6 * detail::canonical(rng)) * static_cast<double>(S);
            const double sigma = 0.1 * static_cast<double>(S) + 0.5;
            Tensor t({C, S, S});
            for (std::size_t c = 0; c < C; ++c) {
                const double amp = 0.5 + detail::canonical(rng);
                for (std::size_t y = 0; y < S; ++y)
                    for (std::size_t x = 0; x < S; ++x) {
                        const double dy = (static_cast<double>(y) - cy) / sigma;
                        const double dx = (static_cast<double>(x) - cx) / sigma;
                        t.at(c, y, x) = amp * std::exp(-0.5 * (dy * dy + dx * dx));
                    }
            }
            return t;
        };
    }

    const fs::path pgm = prepare_output(opts, "erf_" + tag + ".pgm");
    const fs::path ppm = prepare_output(opts, "erf_" + tag + ".ppm");
    log(1, "computing ERF for " + tag + " over " + std::to_string(samples) + " samples");
    ErfMap m = erf_map(model, input_shape, query[0], query[1], samples, opts.seed, sampler);
    write_pgm(m.grid, pgm);
    write_ppm(m.grid, ppm);
    const SupportBox box = support_bbox(m.grid);
    if (box.empty)
        std::cout << "support bounding box: empty\n";
    else
        std::cout << "support bounding box (" << box.r0 << "," << box.c0 << ")-(" << box.r1 << "," << box.c1
                  << ")\n";
    std::cout << "wrote " << pgm.string() << " and " << ppm.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

struct CheckResult {
    std::string name;
    bool pass;
    std::string detail;
};

void run_equivalence(std::vector<CheckResult>& out) {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const std::size_t C = 16, P = 4;
        AttnConfig cfg{C, P, 1, 8, PadMode::CopyShift, RescaleStrategy::PreDopePe};
        AttnWeights w = init_attn_weights(cfg, seed);
        w.key = identity_linear(C);
        w.value = identity_linear(C);
        w.dope = identity_conv1x1(C);
        w.pe_key = identity_conv1x1(C);
        w.pe_value = identity_conv1x1(C);
        std::mt19937_64 rng(100 + seed);
        Tensor x = random_uniform({C, 16, 16}, -1, 1, rng);
        worst = std::max(worst, max_abs_diff(vwa_forward(x, w, cfg), lwa_forward(x, w, P, 8)));
    }
    out.push_back({"vwa_r1_equals_lwa", worst < 1e-12, "max |diff| = " + std::to_string(worst)});
}

void run_gradcheck(std::vector<CheckResult>& out) {
    auto check = [&](const std::string& name, const std::function<Var(Tape&, const Var&)>& fwd, const Tensor& x0) {
        Tensor proj;
        {
            Tape probe_tape;
            Var probe = probe_tape.leaf(x0);
            std::mt19937_64 rng(77);
            proj = random_uniform(fwd(probe_tape, probe).shape(), -1, 1, rng);
        }
        Tape tape;
        Var x = tape.leaf(x0);
        Var s = sum(mul(fwd(tape, x), tape.leaf(proj)));
        GradientMap grads = tape.backward(s);
        Tensor numeric = finite_diff(
            [&](const Tensor& p) {
                Tape t;
                Var v = t.leaf(p);
                return sum(mul(fwd(t, v), t.leaf(proj))).value()[0];
            },
            x0, 1e-5);
        const double err = gradcheck_rel_error(grads.at(x), numeric);
        out.push_back({name, err < 1e-4, "max rel err = " + std::to_string(err)});
    };

    std::mt19937_64 rng(79);
    {
        AttnConfig cfg{8, 2, 1, 2, PadMode::CopyShift, RescaleStrategy::NoRescale};
        const AttnWeights w = init_attn_weights(cfg, 7);
        check(
            "lwa_grad", [&](Tape& t, const Var& x) { return lwa_forward(x, lift(t, w), 2, 2); },
            random_uniform({8, 4, 4}, -1, 1, rng));
    }
    {
        AttnConfig cfg{8, 2, 2, 2, PadMode::CopyShift, RescaleStrategy::PreDopePe};
        const AttnWeights w = init_attn_weights(cfg, 9);
        check(
            "vwa_predopepe_grad", [&](Tape& t, const Var& x) { return vwa_forward(x, lift(t, w), cfg); },
            random_uniform({8, 4, 4}, -1, 1, rng));
    }
}

void run_collapse(std::vector<CheckResult>& out) {
    const std::size_t C = 16, P = 2, R = 4;
    std::mt19937_64 rng(81);
    Tensor x = random_uniform({C, 8, 8}, -1, 1, rng);
    AttnConfig zero_cfg{C, P, R, 2, PadMode::Zero, RescaleStrategy::NoRescale};
    AttnWeights w = init_attn_weights(zero_cfg, 11);
    w.key.bias = Tensor({C});
    AttentionRow zr = attention_row_dump(zero_cfg, w, x, 0, 0);
    CollapseStats zs = collapse_metric(zr.weights, zr.from_padding);
    out.push_back(
        {"zero_pad_collapse", zs.distinct_count == 1, "distinct_count = " + std::to_string(zs.distinct_count)});
    AttnConfig csp_cfg{C, P, R, 2, PadMode::CopyShift, RescaleStrategy::NoRescale};
    AttentionRow cr = attention_row_dump(csp_cfg, w, x, 0, 0);
    CollapseStats cs = collapse_metric(cr.weights, cr.from_padding);
    out.push_back(
        {"csp_no_collapse", cs.distinct_count > 1, "distinct_count = " + std::to_string(cs.distinct_count)});
}

void run_channels(std::vector<CheckResult>& out, std::uint64_t seed) {
    {
        VWFormerConfig cfg = VWFormerConfig::standard(19);
        MultiLevelFeatures f = synth_features(seed, 128, 128, channel_profile("swin-b"));
        VWFormerWeights w = init_vwformer_weights(cfg, channel_profile("swin-b"), seed + 1);
        ChannelFlow flow;
        vwformer_forward(f, w, cfg, &flow);
        const bool ok = flow.aggregated == 512 && flow.concat_width == 2048 && flow.multi_scale_out == 512 &&
                        flow.lle_concat_width == 560 && flow.fused == 256;
        out.push_back({"standard_channel_flow", ok,
                       std::to_string(flow.aggregated) + "->" + std::to_string(flow.concat_width) + "->" +
                           std::to_string(flow.multi_scale_out) + "->" + std::to_string(flow.lle_concat_width) +
                           "->" + std::to_string(flow.fused)});
    }
    {
        VWFormerConfig cfg = VWFormerConfig::efficient(19);
        MultiLevelFeatures f = synth_features(seed, 128, 128, channel_profile("mit-b0"));
        VWFormerWeights w = init_vwformer_weights(cfg, channel_profile("mit-b0"), seed + 1);
        ChannelFlow flow;
        vwformer_forward(f, w, cfg, &flow);
        const bool ok = flow.aggregated == 128 && flow.concat_width == 512 && flow.multi_scale_out == 128 &&
                        flow.lle_concat_width == 160 && flow.fused == 128;
        out.push_back({"efficient_channel_flow", ok,
                       std::to_string(flow.aggregated) + "->" + std::to_string(flow.concat_width) + "->" +
                           std::to_string(flow.multi_scale_out) + "->" + std::to_string(flow.lle_concat_width) +
                           "->" + std::to_string(flow.fused)});
    }
}

int cmd_check(const CommonOpts& opts, const std::string& suite) {
    std::vector<CheckResult> results;
    if (suite == "equivalence" || suite == "all") run_equivalence(results);
    if (suite == "gradcheck" || suite == "all") run_gradcheck(results);
    if (suite == "collapse" || suite == "all") run_collapse(results);
    if (suite == "channels" || suite == "all") run_channels(results, opts.seed);
    if (results.empty())
        throw UsageError("unknown suite '" + suite + "' (equivalence, gradcheck, collapse, channels, all)");

    bool all_pass = true;
    json jr = json::array();
    for (const CheckResult& r : results) {
        all_pass = all_pass && r.pass;
        std::cout << (r.pass ? "PASS" : "FAIL") << " " << r.name << " (" << r.detail << ")\n";
        jr.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
    }
    fs::create_directories(opts.out_dir);
    const fs::path p = fs::path(opts.out_dir) / ("check_" + suite + ".json");
    std::ofstream(p) << json{{"suite", suite}, {"pass", all_pass}, {"checks", jr}}.dump(2) << "\n";
    return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// demo
// ---------------------------------------------------------------------------

int cmd_demo(const CommonOpts& opts) {
    json cfg = load_config(opts, json{{"preset", "standard"},
                                      {"image", 256},
                                      {"num_classes", 19},
                                      {"profile", ""},
                                      {"pad", "csp"}});
    const std::string preset = cfg.at("preset").get<std::string>();
    if (preset != "standard" && preset != "efficient") throw UsageError("preset must be standard or efficient");
    VWFormerConfig dec = preset == "efficient"
                             ? VWFormerConfig::efficient(cfg.at("num_classes").get<std::size_t>())
                             : VWFormerConfig::standard(cfg.at("num_classes").get<std::size_t>());
    if (cfg.contains("agg_channels")) dec.agg_channels = cfg.at("agg_channels").get<std::size_t>();
    if (cfg.contains("lle_channels")) dec.lle_channels = cfg.at("lle_channels").get<std::size_t>();
    if (cfg.contains("out_channels")) dec.out_channels = cfg.at("out_channels").get<std::size_t>();
    if (cfg.contains("scale_group")) dec.scale_group = cfg.at("scale_group").get<std::vector<std::size_t>>();
    if (cfg.contains("heads")) dec.heads = cfg.at("heads").get<std::size_t>();
    dec.pad_mode = parse_pad(cfg.at("pad").get<std::string>());
    try {
        dec.validate();
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }

    std::string profile_name = cfg.at("profile").get<std::string>();
    if (profile_name.empty()) profile_name = preset == "efficient" ? "mit-b0" : "swin-b";
    const ChannelProfile profile = channel_profile(profile_name);
    const std::size_t image = cfg.at("image").get<std::size_t>();

    const fs::path logits_path = prepare_output(opts, "logits.vwt");
    const fs::path report_path = prepare_output(opts, "demo_cost.json");

    log(1, "synthesizing " + profile_name + " features at " + std::to_string(image));
    MultiLevelFeatures f = synth_features(opts.seed, image, image, profile);
    VWFormerWeights w = init_vwformer_weights(dec, profile, opts.seed + 1);

    ChannelFlow flow;
    CostCounter counter;
    Tensor logits;
    {
        CounterScope scope(counter);
        logits = vwformer_forward(f, w, dec, &flow);
    }
    save_tensor(logits_path, logits);

    json report{{"preset", preset},
                {"profile", profile_name},
                {"image", image},
                {"num_classes", dec.num_classes},
                {"seed", opts.seed},
                {"logits_shape", logits.shape()},
                {"channel_flow",
                 {flow.aggregated, flow.concat_width, flow.multi_scale_out, flow.lle_concat_width, flow.fused}},
                {"cost",
                 {{"macs_linear", counter.macs_linear},
                  {"macs_attention", counter.macs_attention},
                  {"macs_total", counter.macs_total()},
                  {"mem_linear_elems", counter.mem_linear_elems},
                  {"mem_attn_elems", counter.mem_attn_elems}}}};
    std::ofstream(report_path) << report.dump(2) << "\n";
    std::cout << "logits " << shape_str(logits.shape()) << " -> " << logits_path.string() << "\n";
    std::cout << "cost report -> " << report_path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"varying-window attention workbench"};
    app.require_subcommand(1);

    CommonOpts cost_opts, erf_opts, check_opts, demo_opts;

    CLI::App* cost = app.add_subcommand("cost", "analytic vs measured cost sweep (CSV + JSON)");
    add_common(cost, cost_opts);
    bool measure_only = false;
    cost->add_flag("--measure-only", measure_only, "skip analytic columns");

    CLI::App* erf = app.add_subcommand("erf", "effective-receptive-field heatmaps (PGM + PPM)");
    add_common(erf, erf_opts);
    std::string model_spec = "lwa", pad = "csp";
    std::size_t size = 32, channels = 16, window = 4, heads = 8, samples = 16;
    std::vector<std::size_t> query;
    bool structured = false;
    erf->add_option("--model", model_spec, "short | lwa | vwa:R | ga | vwformer-stage");
    erf->add_option("--size", size, "feature side length");
    erf->add_option("--channels", channels, "feature channels");
    erf->add_option("--window", window, "query window P");
    erf->add_option("--heads", heads, "attention heads");
    erf->add_option("--query", query, "query pixel row col")->expected(2);
    erf->add_option("--samples", samples, "random inputs to average");
    erf->add_option("--pad", pad, "csp | zero");
    erf->add_flag("--structured", structured, "smooth blob inputs instead of noise");

    CLI::App* check = app.add_subcommand("check", "invariant suites with JSON summary");
    add_common(check, check_opts);
    std::string suite = "all";
    check->add_option("suite", suite, "equivalence | gradcheck | collapse | channels | all");

    CLI::App* demo = app.add_subcommand("demo", "decoder forward on synthetic features");
    add_common(demo, demo_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (cost->parsed()) {
            if (measure_only) cost_opts.overrides.push_back("measure_only=true");
            return cmd_cost(cost_opts);
        }
        if (erf->parsed())
            return cmd_erf(erf_opts, model_spec, size, channels, window, heads, query, samples, pad, structured);
        if (check->parsed()) return cmd_check(check_opts, suite);
        if (demo->parsed()) return cmd_demo(demo_opts);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
