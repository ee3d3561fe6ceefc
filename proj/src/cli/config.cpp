#include "atomread/cli/config.hpp"

#include <cstdlib>
#include <fstream>

using nlohmann::json;

namespace atomread::cli {

RunConfig default_config(const std::string& preset) {
    RunConfig c;
    c.preset = preset;
    simcam::Preset p;
    if (preset == "desk-5um" || preset == "custom")
        p = simcam::desk_preset_5um();
    else if (preset == "desk-9um")
        p = simcam::desk_preset_9um();
    else
        throw std::invalid_argument("unknown preset: " + preset);
    c.geometry = p.geometry;
    c.optics = p.optics;
    c.data.durations_ms = p.durations_ms;

    // Desk-scale training defaults: quarter width with a faster schedule than
    // the full-width reference settings carried by TrainConfig itself.
    c.gen.width_mult = 0.25;
    c.disc.width_mult = 0.25;
    c.train.epochs = 10;
    c.train.lr = 1e-3;
    c.train.batch_size = 8;
    c.qec.rep = qec::RepCodeConfig{};
    c.qec.timing.t_gate = 5e-6;
    c.qec.timing.t_reset = 0.0;
    return c;
}

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key))
        out = j.at(key).get<T>();
}

void apply_geometry(const json& j, simcam::LatticeGeometry& g) {
    maybe(j, "rows", g.rows);
    maybe(j, "cols", g.cols);
    maybe(j, "pitch_px", g.pitch_px);
    maybe(j, "patch_px", g.patch_px);
    maybe(j, "image_h", g.image_h);
    maybe(j, "image_w", g.image_w);
    maybe(j, "origin_y", g.origin_y);
    maybe(j, "origin_x", g.origin_x);
}

void apply_optics(const json& j, simcam::OpticsConfig& o) {
    maybe(j, "bright_rate", o.bright_rate);
    maybe(j, "dark_rate", o.dark_rate);
    maybe(j, "background_rate", o.background_rate);
    maybe(j, "psf_sigma_px", o.psf_sigma_px);
    maybe(j, "attenuation", o.attenuation);
    maybe(j, "em_gain", o.em_gain);
    maybe(j, "read_noise", o.read_noise);
    maybe(j, "bias", o.bias);
}

}  // namespace

RunConfig config_from_json(const json& j) {
    RunConfig c = default_config(j.value("preset", "desk-5um"));
    maybe(j, "seed", c.seed);
    if (j.contains("paths")) {
        maybe(j["paths"], "data_dir", c.data_dir);
        maybe(j["paths"], "checkpoint_dir", c.checkpoint_dir);
        maybe(j["paths"], "report_dir", c.report_dir);
    }
    if (j.contains("geometry"))
        apply_geometry(j["geometry"], c.geometry);
    if (j.contains("optics"))
        apply_optics(j["optics"], c.optics);
    if (j.contains("data")) {
        const auto& d = j["data"];
        maybe(d, "durations_ms", c.data.durations_ms);
        maybe(d, "shots_per_duration", c.data.shots_per_duration);
        maybe(d, "p_bright", c.data.p_bright);
        maybe(d, "label_noise", c.data.label_noise);
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        maybe(t, "lr", c.train.lr);
        maybe(t, "beta1", c.train.beta1);
        maybe(t, "beta2", c.train.beta2);
        maybe(t, "batch_size", c.train.batch_size);
        maybe(t, "epochs", c.train.epochs);
        maybe(t, "lambda_l1", c.train.lambda_l1);
        maybe(t, "label_real", c.train.label_real);
        maybe(t, "label_fake", c.train.label_fake);
        maybe(t, "d_update_period", c.train.d_update_period);
        maybe(t, "cosine_lr", c.train.cosine_lr);
        maybe(t, "early_stop_patience", c.train.early_stop_patience);
        maybe(t, "lambda_ssim", c.train.lambda_ssim);
        maybe(t, "lambda_mse", c.train.lambda_mse);
        maybe(t, "width_mult", c.gen.width_mult);
        if (j["train"].contains("width_mult"))
            c.disc.width_mult = c.gen.width_mult;
        maybe(t, "generator_norm", c.gen.use_norm);
        maybe(t, "dropout_rate", c.disc.dropout_rate);
    }
    if (j.contains("classifier")) {
        const auto& cl = j["classifier"];
        maybe(cl, "lr", c.classifier.lr);
        maybe(cl, "max_epochs", c.classifier.max_epochs);
        maybe(cl, "batch_size", c.classifier.batch_size);
        maybe(cl, "patience", c.classifier.patience);
        maybe(cl, "hidden_fnn", c.classifier.hidden_fnn);
        maybe(cl, "hidden_mfnn", c.classifier.hidden_mfnn);
    }
    if (j.contains("qec")) {
        const auto& q = j["qec"];
        maybe(q, "distance", c.qec.rep.distance);
        maybe(q, "rounds", c.qec.rep.rounds);
        maybe(q, "shots", c.qec.rep.shots);
        maybe(q, "max_bruteforce_defects", c.qec.rep.max_bruteforce_defects);
        maybe(q, "t1_s", c.qec.coherence.t1);
        maybe(q, "t2_s", c.qec.coherence.t2);
        maybe(q, "t_gate_s", c.qec.timing.t_gate);
        maybe(q, "t_reset_s", c.qec.timing.t_reset);
        maybe(q, "t_classification_s", c.qec.timing.t_classification);
        maybe(q, "t_denoise_s", c.qec.timing.t_denoise);
    }
    if (j.contains("bench")) {
        const auto& b = j["bench"];
        maybe(b, "batch_sizes", c.bench.batch_sizes);
        maybe(b, "instances", c.bench.instances);
        maybe(b, "grids", c.bench.grids);
        maybe(b, "iters", c.bench.iters);
        maybe(b, "warmup", c.bench.warmup);
        maybe(b, "frames_per_grid", c.bench.frames_per_grid);
    }

    // Environment overrides apply to path fields only.
    if (const char* v = std::getenv("ATOMREAD_DATA_DIR"))
        c.data_dir = v;
    if (const char* v = std::getenv("ATOMREAD_CHECKPOINT_DIR"))
        c.checkpoint_dir = v;
    if (const char* v = std::getenv("ATOMREAD_REPORT_DIR"))
        c.report_dir = v;
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config: " + path);
    return config_from_json(json::parse(in));
}

json config_to_json(const RunConfig& c) {
    json j;
    j["preset"] = c.preset;
    j["seed"] = c.seed;
    j["paths"] = {{"data_dir", c.data_dir},
                  {"checkpoint_dir", c.checkpoint_dir},
                  {"report_dir", c.report_dir}};
    j["geometry"] = {{"rows", c.geometry.rows},         {"cols", c.geometry.cols},
                     {"pitch_px", c.geometry.pitch_px}, {"patch_px", c.geometry.patch_px},
                     {"image_h", c.geometry.image_h},   {"image_w", c.geometry.image_w},
                     {"origin_y", c.geometry.origin_y}, {"origin_x", c.geometry.origin_x}};
    j["optics"] = {{"bright_rate", c.optics.bright_rate},
                   {"dark_rate", c.optics.dark_rate},
                   {"background_rate", c.optics.background_rate},
                   {"psf_sigma_px", c.optics.psf_sigma_px},
                   {"attenuation", c.optics.attenuation},
                   {"em_gain", c.optics.em_gain},
                   {"read_noise", c.optics.read_noise},
                   {"bias", c.optics.bias}};
    j["data"] = {{"durations_ms", c.data.durations_ms},
                 {"shots_per_duration", c.data.shots_per_duration},
                 {"p_bright", c.data.p_bright},
                 {"label_noise", c.data.label_noise}};
    j["train"] = {{"lr", c.train.lr},
                  {"beta1", c.train.beta1},
                  {"beta2", c.train.beta2},
                  {"batch_size", c.train.batch_size},
                  {"epochs", c.train.epochs},
                  {"lambda_l1", c.train.lambda_l1},
                  {"label_real", c.train.label_real},
                  {"label_fake", c.train.label_fake},
                  {"d_update_period", c.train.d_update_period},
                  {"cosine_lr", c.train.cosine_lr},
                  {"early_stop_patience", c.train.early_stop_patience},
                  {"lambda_ssim", c.train.lambda_ssim},
                  {"lambda_mse", c.train.lambda_mse},
                  {"width_mult", c.gen.width_mult},
                  {"generator_norm", c.gen.use_norm},
                  {"dropout_rate", c.disc.dropout_rate}};
    j["classifier"] = {{"lr", c.classifier.lr},
                       {"max_epochs", c.classifier.max_epochs},
                       {"batch_size", c.classifier.batch_size},
                       {"patience", c.classifier.patience},
                       {"hidden_fnn", c.classifier.hidden_fnn},
                       {"hidden_mfnn", c.classifier.hidden_mfnn}};
    j["qec"] = {{"distance", c.qec.rep.distance},
                {"rounds", c.qec.rep.rounds},
                {"shots", c.qec.rep.shots},
                {"max_bruteforce_defects", c.qec.rep.max_bruteforce_defects},
                {"t1_s", c.qec.coherence.t1},
                {"t2_s", c.qec.coherence.t2},
                {"t_gate_s", c.qec.timing.t_gate},
                {"t_reset_s", c.qec.timing.t_reset},
                {"t_classification_s", c.qec.timing.t_classification},
                {"t_denoise_s", c.qec.timing.t_denoise}};
    j["bench"] = {{"batch_sizes", c.bench.batch_sizes},
                  {"instances", c.bench.instances},
                  {"grids", c.bench.grids},
                  {"iters", c.bench.iters},
                  {"warmup", c.bench.warmup},
                  {"frames_per_grid", c.bench.frames_per_grid}};
    return j;
}

std::vector<ConfigError> validate_config(const RunConfig& c) {
    std::vector<ConfigError> errors;
    auto check = [&errors](bool ok, const std::string& field, const std::string& msg) {
        if (!ok)
            errors.push_back({field, msg});
    };

    try {
        c.geometry.validate();
    } catch (const std::exception& e) {
        errors.push_back({"geometry", e.what()});
    }
    try {
        c.optics.validate();
    } catch (const std::exception& e) {
        errors.push_back({"optics", e.what()});
    }
    try {
        c.train.validate();
    } catch (const std::exception& e) {
        errors.push_back({"train", e.what()});
    }

    check(!c.data.durations_ms.empty(), "data.durations_ms", "must be non-empty");
    for (double d : c.data.durations_ms)
        check(d > 0.0, "data.durations_ms", "durations must be > 0");
    check(c.data.shots_per_duration >= 0, "data.shots_per_duration", "must be >= 0");
    check(c.data.p_bright >= 0.0 && c.data.p_bright <= 1.0, "data.p_bright",
          "must be in [0,1]");

    check(c.gen.width_mult > 0.0, "train.width_mult", "must be > 0");
    check(c.disc.dropout_rate >= 0.0 && c.disc.dropout_rate < 1.0,
          "train.dropout_rate", "must be in [0,1)");

    check(c.classifier.lr > 0.0, "classifier.lr", "must be > 0");
    check(c.classifier.max_epochs >= 1, "classifier.max_epochs", "must be >= 1");

    check(c.qec.rep.distance >= 3 && c.qec.rep.distance % 2 == 1, "qec.distance",
          "must be odd and >= 3");
    check(c.qec.rep.rounds >= 1, "qec.rounds", "must be >= 1");
    check(c.qec.rep.shots >= 1, "qec.shots", "must be >= 1");
    check(c.qec.coherence.t1 > 0.0 && c.qec.coherence.t2 > 0.0, "qec.t1_s",
          "T1 and T2 must be > 0");
    check(c.qec.coherence.t2 <= 2.0 * c.qec.coherence.t1, "qec.t2_s",
          "T2 <= 2*T1 (CP bound)");
    check(c.qec.timing.t_gate >= 0.0 && c.qec.timing.t_reset >= 0.0, "qec.t_gate_s",
          "times must be >= 0");

    check(!c.bench.batch_sizes.empty(), "bench.batch_sizes", "must be non-empty");
    check(c.bench.iters >= 1, "bench.iters", "must be >= 1");
    check(c.bench.warmup >= 1, "bench.warmup", "must be >= 1");
    return errors;
}

}  // namespace atomread::cli
