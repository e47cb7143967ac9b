#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "costgcn/costgcn.hpp"

namespace costgcn::cli {

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kInvalid = 2, kModeMisuse = 3 };

// `preset:<kind>:<variant>[:<scale>]` or a path to a JSON config.
inline NetworkConfig resolve_config(const std::string& spec) {
    const std::string prefix = "preset:";
    if (spec.rfind(prefix, 0) == 0) {
        std::vector<std::string> parts;
        std::stringstream ss(spec.substr(prefix.size()));
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() < 2 || parts.size() > 3) {
            throw ConfigError("preset spec must be preset:<kind>:<variant>[:<scale>], got '" + spec + "'");
        }
        return preset(preset_kind_from(parts[0]), variant_from(parts[1]),
                      parts.size() == 3 ? scale_from(parts[2]) : Scale::full);
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(spec));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + spec + ": " + e.what());
    }
    return config_from_json(j);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw FormatError("write failed: " + path.string());
}

inline std::string float_str(float v) {
    std::ostringstream os;
    os << std::setprecision(9) << v;
    return os.str();
}

inline nlohmann::json top_json(const Tensor& logits, std::size_t k) {
    nlohmann::json top = nlohmann::json::array();
    for (std::size_t c : top_k(logits, k)) top.push_back({{"class", c}, {"logit", logits[c]}});
    return top;
}

struct Options {
    std::string config, weights, clip, file, modality = "joints", emit = "logits", out, target = "co";
    std::string preset_name = "stgcn", variant = "reg", scale = "tiny", bench_scale = "full", clip_out, config_out;
    std::size_t top = 5, T = 300, frames = 200, reps = 5, persons = 1, clip_frames = 64;
    std::uint32_t seed = 0;
    bool use_stdin = false, json = false, corrupt_delay = false;
};

inline int infer_clip(const Options& o, std::ostream& out) {
    const Model model = bind_model(resolve_config(o.config), load_weights(o.weights));
    const ModalityKind kind = modality_from(o.modality);
    const Tensor clip = derive_modality(read_clip(o.clip), kind, &model.config.graph);
    const Tensor logits = forward_clip(model, clip);
    out << "model " << model.config.name << "  clip " << shape_str(clip.shape()) << "  modality " << to_string(kind)
        << '\n';
    std::size_t rank = 1;
    for (std::size_t c : top_k(logits, o.top)) out << "  #" << rank++ << "  class " << c << "  logit " << float_str(logits[c]) << '\n';
    out << "logits";
    for (float v : logits.data()) out << ' ' << float_str(v);
    out << '\n';
    return kOk;
}

inline int infer_stream(const Options& o, std::istream& in, std::ostream& out, std::ostream& err) {
    const Model model = bind_model(resolve_config(o.config), load_weights(o.weights));
    if (o.emit != "logits" && o.emit != "jsonl" && o.emit != "top") {
        throw ConfigError("--emit must be logits, jsonl or top");
    }
    StreamState state = init_stream(model, o.persons);
    ModalityStream modality(modality_from(o.modality), model.config.graph);

    std::ifstream file;
    std::istream* src = &in;
    if (!o.file.empty()) {
        file.open(o.file);
        if (!file) throw FormatError("cannot open " + o.file);
        src = &file;
    }
    FrameReader reader(*src, model.config.in_channels, model.config.num_joints(), o.persons);
    std::size_t emitted = 0;
    while (auto frame = reader.next()) {
        auto pred = forward_step(model, state, modality.step(frame->data));
        if (!pred) continue;
        nlohmann::json line{{"frame_index", pred->frame_index}, {"t", frame->t}};
        if (o.emit == "top")
            line["top"] = top_json(pred->logits, o.top);
        else
            line["logits"] = std::vector<float>(pred->logits.data().begin(), pred->logits.data().end());
        out << line.dump() << '\n';
        ++emitted;
    }
    for (const auto& w : reader.warnings()) err << "warning: " << w << '\n';
    if (reader.skipped() > 0) err << "warning: skipped " << reader.skipped() << " malformed line(s)\n";
    err << "frames " << state.frames_seen() << "  predictions " << emitted << '\n';
    return kOk;
}

inline int convert_cmd(const Options& o, std::ostream& out, std::ostream& err) {
    const NetworkConfig src = resolve_config(o.config);
    const ConvertTarget target = o.target == "co"        ? ConvertTarget::co
                                 : o.target == "co_star" ? ConvertTarget::co_star
                                                         : throw ConfigError("--target must be co or co_star");
    const auto [cfg, report] = convert(src, target);
    write_text(o.out, to_json(cfg).dump(2) + "\n");
    out << "converted " << src.name << " -> " << cfg.name << '\n';
    for (std::size_t i = 0; i < report.delays.size(); ++i)
        out << "  block " << i << "  residual delay " << report.delays[i] << '\n';
    out << "total delay " << report.total_delay << " frames  network stride " << report.network_stride << '\n';
    for (const auto& w : report.warnings) err << "warning: " << w << '\n';
    return kOk;
}

inline int verify_cmd(const Options& o, std::ostream& out) {
    const VerifyReport report = run_verify(preset_kind_from(o.preset_name), o.seed, scale_from(o.scale), o.corrupt_delay);
    for (const auto& c : report.cases) {
        out << std::left << std::setw(28) << c.label << " max_abs_diff " << std::setw(14) << c.diff.max_abs
            << " outputs " << std::setw(5) << c.diff.compared << (c.diff.ok() ? " PASS" : " FAIL");
        if (!c.diff.failure.empty()) out << "  (" << c.diff.failure << ")";
        out << '\n';
    }
    out << (report.pass() ? "verify: PASS" : "verify: FAIL") << "  tolerance " << kVerifyTolerance << '\n';
    return report.pass() ? kOk : kVerifyFailed;
}

inline int flops_cmd(const Options& o, std::ostream& out) {
    const PresetKind kind = preset_kind_from(o.preset_name);
    const Variant variant = variant_from(o.variant);
    const NetworkConfig reg = preset(kind, Variant::reg);
    const NetworkConfig step = preset(kind, variant == Variant::reg ? Variant::co : variant);
    const FlopsReport r = make_report(reg, step, o.T);
    if (o.json) {
        nlohmann::json j = to_json(r);
        j["clip_config"] = reg.name;
        j["step_config"] = step.name;
        j["T"] = o.T;
        out << j.dump(2) << '\n';
    } else {
        out << "clip: " << reg.name << " at T=" << o.T << "   step: " << step.name << '\n' << format_table(r);
    }
    return kOk;
}

inline int bench_cmd(const Options& o, std::ostream& out) {
    const PresetKind kind = preset_kind_from(o.preset_name);
    const Variant variant = variant_from(o.variant);
    BenchOptions bo;
    bo.frames = o.frames;
    bo.reps = o.reps;
    bo.seed = o.seed;
    const BenchResult r = run_bench(preset(kind, Variant::reg, scale_from(o.bench_scale)),
                                    preset(kind, variant == Variant::reg ? Variant::co : variant, scale_from(o.bench_scale)), bo);
    if (o.json) {
        out << to_json(r).dump(2) << '\n';
    } else {
        out << std::fixed << std::setprecision(2);
        out << "clip " << r.clip_config << " (T=" << r.clip_T << ")   " << r.clip_preds_per_s << " preds/s\n";
        out << "step " << r.step_config << " (" << r.frames << " frames/rep)   " << r.step_preds_per_s << " preds/s\n";
        out << "step / clip " << r.ratio << "x   (median of " << r.reps << " reps after warm-up)\n";
    }
    return kOk;
}

inline int init_random_cmd(const Options& o, std::ostream& out) {
    const NetworkConfig cfg = resolve_config(o.config);
    const WeightStore w = init_random(cfg, o.seed);
    save_weights(o.out, w);
    out << "wrote " << w.size() << " tensors (" << count_params(cfg) << " trainable parameters) to " << o.out << '\n';
    if (!o.config_out.empty()) {
        write_text(o.config_out, to_json(cfg).dump(2) + "\n");
        out << "wrote config " << cfg.name << " to " << o.config_out << '\n';
    }
    if (!o.clip_out.empty()) {
        const Tensor clip = random_clip(cfg.in_channels, o.clip_frames, cfg.num_joints(), o.persons, o.seed + 1);
        write_clip(o.clip_out, clip);
        out << "wrote clip " << shape_str(clip.shape()) << " to " << o.clip_out << '\n';
    }
    return kOk;
}

inline int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Continual spatio-temporal graph convolution inference"};
    app.name("costgcn");
    app.require_subcommand(1);
    Options o;

    auto* ic = app.add_subcommand("infer-clip", "Classify a clip file");
    ic->add_option("--config", o.config, "Config JSON or preset:<kind>:<variant>[:<scale>]")->required();
    ic->add_option("--weights", o.weights, "COSG weight file")->required();
    ic->add_option("--clip", o.clip, "COSG clip file")->required();
    ic->add_option("--modality", o.modality, "joints|bones|joint_motion|bone_motion");
    ic->add_option("--top", o.top, "Number of classes to print");

    auto* is = app.add_subcommand("infer-stream", "Online prediction over JSON-lines frames");
    is->add_option("--config", o.config, "Continual config JSON or preset spec")->required();
    is->add_option("--weights", o.weights, "COSG weight file")->required();
    auto* file_opt = is->add_option("--file", o.file, "Read frames from a file");
    is->add_flag("--stdin", o.use_stdin, "Read frames from standard input (default)")->excludes(file_opt);
    is->add_option("--emit", o.emit, "logits|top (jsonl is an alias of logits)");
    is->add_option("--top", o.top, "Classes per line with --emit top");
    is->add_option("--persons", o.persons, "Bodies per frame");
    is->add_option("--modality", o.modality, "joints|bones|joint_motion|bone_motion");

    auto* cv = app.add_subcommand("convert", "Convert a regular config to a continual one");
    cv->add_option("--config", o.config, "Input config JSON or preset spec")->required();
    cv->add_option("--target", o.target, "co|co_star");
    cv->add_option("--out", o.out, "Output config JSON")->required();

    auto* vf = app.add_subcommand("verify", "Clip/step equivalence suite on random weights");
    vf->add_option("--preset", o.preset_name, "stgcn|agcn|str");
    vf->add_option("--seed", o.seed, "Random seed");
    vf->add_option("--scale", o.scale, "tiny|small");
    vf->add_flag("--corrupt-delay", o.corrupt_delay, "Shift residual delays in the stream (negative control)");

    auto* fl = app.add_subcommand("flops", "Analytical cost report");
    fl->add_option("--preset", o.preset_name, "stgcn|agcn|str");
    fl->add_option("--variant", o.variant, "reg|co|co_star (reg reports against co)");
    fl->add_option("--T", o.T, "Clip length for clip-mode cost");
    fl->add_flag("--json", o.json, "JSON output");

    auto* bn = app.add_subcommand("bench", "Clip vs step throughput on this host");
    bn->add_option("--preset", o.preset_name, "stgcn|agcn|str");
    bn->add_option("--variant", o.variant, "co|co_star (reg benchmarks against co)");
    bn->add_option("--frames", o.frames, "Stream frames per step repetition");
    bn->add_option("--reps", o.reps, "Timed repetitions per mode");
    bn->add_option("--scale", o.bench_scale, "full|small|tiny");
    bn->add_option("--seed", o.seed, "Random seed");
    bn->add_flag("--json", o.json, "JSON output");

    auto* ir = app.add_subcommand("init-random", "Write shape-correct random weights");
    ir->add_option("--config", o.config, "Config JSON or preset spec")->required();
    ir->add_option("--out", o.out, "Output COSG file")->required();
    ir->add_option("--seed", o.seed, "Random seed");
    ir->add_option("--config-out", o.config_out, "Also write the resolved config JSON");
    ir->add_option("--clip-out", o.clip_out, "Also write a random clip");
    ir->add_option("--clip-frames", o.clip_frames, "Frames in the random clip");
    ir->add_option("--persons", o.persons, "Bodies in the random clip");

    std::vector<std::string> argv_store{"costgcn"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kInvalid;
    }

    try {
        if (*ic) return infer_clip(o, out);
        if (*is) return infer_stream(o, in, out, err);
        if (*cv) return convert_cmd(o, out, err);
        if (*vf) return verify_cmd(o, out);
        if (*fl) return flops_cmd(o, out);
        if (*bn) return bench_cmd(o, out);
        if (*ir) return init_random_cmd(o, out);
    } catch (const ModeError& e) {
        err << "error: " << e.what() << '\n';
        return kModeMisuse;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kInvalid;
    }
    return kInvalid;
}

}  // namespace costgcn::cli
