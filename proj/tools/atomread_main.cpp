// atomread: synthetic neutral-atom readout pipeline. Generates paired
// two-exposure fluorescence data, trains the conditional-GAN denoiser and the
// per-site classifiers, and quantifies the downstream effect on QEC cycle
// time and logical error rate.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "atomread/bench/bench.hpp"
#include "atomread/classify/classify.hpp"
#include "atomread/cli/config.hpp"
#include "atomread/cli/manifest.hpp"
#include "atomread/cli/plot.hpp"
#include "atomread/core/csv.hpp"
#include "atomread/denoiser/denoiser.hpp"
#include "atomread/metrics/metrics.hpp"
#include "atomread/qec/qec.hpp"
#include "atomread/simcam/simcam.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace atomread;

namespace {

struct MissingArtifact : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_artifact(const std::string& path, const std::string& what) {
    if (!fs::exists(path))
        throw MissingArtifact(what + " not found: " + path);
}

simcam::Dataset load_dataset_checked(const std::string& dir) {
    require_artifact(dir, "dataset");
    return simcam::load_dataset(dir);
}

denoise::Checkpoint load_checkpoint_checked(const std::string& path) {
    require_artifact(path, "checkpoint");
    return denoise::load_checkpoint(path);
}

std::vector<classify::ClassifierModel> load_models_checked(const std::string& path) {
    require_artifact(path, "model file");
    return classify::load_models(path);
}

// Frames and labels of a split for the given source view of the dataset.
struct SplitFrames {
    std::vector<Frame> frames;
    std::vector<std::vector<uint8_t>> labels;
};

SplitFrames frames_for(const simcam::Dataset& d, const std::vector<size_t>& ids,
                       const std::string& source) {
    SplitFrames out;
    for (size_t i : ids) {
        if (source == "long")
            out.frames.push_back(d.shots[i].long_image);
        else  // raw | denoised both live in the short slot
            out.frames.push_back(d.shots[i].short_image);
        out.labels.push_back(d.shots[i].true_states);
    }
    return out;
}

void check_source(const simcam::Dataset& d, const std::string& source) {
    if (source != "raw" && source != "denoised" && source != "long")
        throw std::invalid_argument("unknown source: " + source);
    if (source == "denoised" && !d.denoised)
        throw std::invalid_argument(
            "--source denoised requires a dataset produced by the denoise command");
    if (source == "raw" && d.denoised)
        throw std::invalid_argument("--source raw given a denoised dataset");
}

std::vector<Frame> run_denoiser(const denoise::Checkpoint& ckpt,
                                const std::vector<Frame>& raw, int batch) {
    std::vector<Frame> normed;
    normed.reserve(raw.size());
    for (const auto& f : raw)
        normed.push_back(simcam::normalize(f, ckpt.norm));
    auto out = denoise::denoise(ckpt, normed, batch);
    for (auto& f : out)
        f = simcam::denormalize(f, ckpt.norm);
    return out;
}

json report_to_json(const classify::ClassifierReport& r) {
    json j;
    j["delta"] = r.delta;
    j["per_site_delta"] = r.per_site_delta;
    j["bright_to_dark"] = r.bright_to_dark;
    j["dark_to_bright"] = r.dark_to_bright;
    j["evaluated_sites"] = r.evaluated_sites;
    j["retained_fraction"] = r.retained_fraction;
    if (r.eta) {
        j["eta"] = *r.eta;
        j["baseline"] = r.baseline_name;
    }
    j["latency_s"] = {{"mean", r.latency.mean_s},
                      {"p50", r.latency.p50_s},
                      {"p99", r.latency.p99_s}};
    return j;
}

void write_eval_csv(const classify::ClassifierReport& r, const std::string& path) {
    CsvWriter csv({"scope", "delta", "bright_to_dark", "dark_to_bright", "eta",
                   "retained_fraction"});
    const std::string eta = r.eta ? CsvWriter::format_double(*r.eta) : "";
    for (size_t s = 0; s < r.per_site_delta.size(); ++s) {
        csv.cell("site" + std::to_string(s)).cell(r.per_site_delta[s]).cell("").cell("")
            .cell("").cell("");
        csv.end_row();
    }
    csv.cell("avg").cell(r.delta).cell(r.bright_to_dark).cell(r.dark_to_bright)
        .cell(eta).cell(r.retained_fraction);
    csv.end_row();
    csv.write(path);
}

void ensure_parent(const std::string& path) {
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty())
        fs::create_directories(parent);
}

void write_json(const json& j, const std::string& path) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

int fail_with(int code, const std::string& message, const std::string& field = "") {
    json err{{"code", code}, {"message", message}};
    if (!field.empty())
        err["field"] = field;
    std::cerr << err.dump() << "\n";
    return code;
}

// ---------------------------------------------------------------------------

int cmd_validate(const cli::RunConfig& cfg) {
    const auto errors = cli::validate_config(cfg);
    if (errors.empty()) {
        std::cout << "config ok\n";
        return 0;
    }
    json list = json::array();
    for (const auto& e : errors)
        list.push_back({{"field", e.field}, {"message", e.message}});
    std::cerr << json{{"code", 2}, {"message", "invalid config"}, {"errors", list}}.dump(2)
              << "\n";
    return 2;
}

int cmd_gen_data(const cli::RunConfig& cfg, const std::string& out_dir, bool relabel) {
    cli::ManifestWriter manifest("gen-data", cli::config_to_json(cfg));
    simcam::Dataset d =
        simcam::generate_dataset(cfg.geometry, cfg.optics, cfg.data.durations_ms,
                                 cfg.data.shots_per_duration, cfg.data.p_bright, cfg.seed);
    if (relabel || cfg.data.label_noise)
        simcam::relabel_from_long_exposure(d);
    if (!d.train_idx.empty())
        d.norm = simcam::compute_norm_stats(d);
    simcam::save_dataset(d, out_dir);
    manifest.add_output(out_dir);
    manifest.write(cfg.report_dir);
    std::cout << "wrote " << d.shots.size() << " shots to " << out_dir << "\n";
    return 0;
}

int cmd_stitch(const cli::RunConfig& cfg, const std::string& in_dir, int rows, int cols,
               int shots, const std::string& out_dir, const std::string& split) {
    cli::ManifestWriter manifest("stitch", cli::config_to_json(cfg));
    simcam::Dataset src = load_dataset_checked(in_dir);
    const bool was_denoised = src.denoised;
    if (split != "all") {
        const auto ids = src.split(split);
        simcam::Dataset sub = simcam::subset_dataset(src, ids);
        src = std::move(sub);
    }
    simcam::Dataset stitched =
        simcam::make_stitched_dataset(src, rows, cols, shots, cfg.seed);
    stitched.denoised = was_denoised;
    simcam::save_dataset(stitched, out_dir);
    manifest.add_input(in_dir);
    manifest.add_output(out_dir);
    manifest.write(cfg.report_dir);
    std::cout << "stitched " << shots << " " << rows << "x" << cols << " frames ("
              << stitched.geometry.image_h << "x" << stitched.geometry.image_w
              << " px) to " << out_dir << "\n";
    return 0;
}

int cmd_train_denoiser(const cli::RunConfig& cfg, const std::string& in_dir,
                       const std::string& ckpt_out) {
    cli::ManifestWriter manifest("train-denoiser", cli::config_to_json(cfg));
    const simcam::Dataset d = load_dataset_checked(in_dir);
    const simcam::NormStats norm = d.norm ? *d.norm : simcam::compute_norm_stats(d);

    auto [ckpt, report] = denoise::train(d, cfg.gen, cfg.disc, cfg.train, norm);
    ensure_parent(ckpt_out);
    denoise::save_checkpoint(ckpt, ckpt_out);

    fs::create_directories(cfg.report_dir);
    const std::string csv_path =
        (fs::path(cfg.report_dir) / "train_report.csv").string();
    CsvWriter csv({"epoch", "lr", "gen_loss", "adv_term", "l1_term", "disc_loss",
                   "val_l1", "val_psnr", "val_ssim"});
    for (const auto& e : report.epochs) {
        csv.cell(e.epoch).cell(e.lr).cell(e.gen_loss).cell(e.adv_term).cell(e.l1_term)
            .cell(e.disc_loss).cell(e.val_l1).cell(e.val_psnr).cell(e.val_ssim);
        csv.end_row();
    }
    csv.write(csv_path);

    json summary;
    summary["best_epoch"] = report.best_epoch;
    summary["best_val_l1"] = report.best_val_l1;
    summary["initial_val_l1"] = report.initial_val_l1;
    summary["early_stopped"] = report.early_stopped;
    summary["epochs_run"] = report.epochs.size();
    double wall = 0;
    for (const auto& e : report.epochs)
        wall += e.wall_time_s;
    summary["wall_time_s"] = wall;
    summary["generator_params"] = ckpt.generator.param_count();
    summary["discriminator_params"] = ckpt.discriminator.param_count();
    write_json(summary, (fs::path(cfg.report_dir) / "train_report.json").string());

    manifest.add_input(in_dir);
    manifest.add_output(ckpt_out);
    manifest.add_output(csv_path);
    manifest.write(cfg.report_dir);
    std::cout << "checkpoint " << ckpt_out << " best val L1 " << report.best_val_l1
              << " (epoch " << report.best_epoch << ")\n";
    return 0;
}

int cmd_denoise(const cli::RunConfig& cfg, const std::string& ckpt_path,
                const std::string& in_dir, const std::string& out_dir, int batch) {
    cli::ManifestWriter manifest("denoise", cli::config_to_json(cfg));
    const denoise::Checkpoint ckpt = load_checkpoint_checked(ckpt_path);
    simcam::Dataset d = load_dataset_checked(in_dir);

    std::vector<Frame> shorts;
    shorts.reserve(d.shots.size());
    for (const auto& s : d.shots)
        shorts.push_back(simcam::normalize(s.short_image, ckpt.norm));
    denoise::DenoiseReport dreport;
    auto out = denoise::denoise(ckpt, shorts, batch, &dreport);
    for (size_t i = 0; i < d.shots.size(); ++i)
        d.shots[i].short_image = simcam::denormalize(out[i], ckpt.norm);
    d.denoised = true;
    simcam::save_dataset(d, out_dir);

    if (dreport.flagged_unnormalized)
        std::cerr << "warning: input statistics outside the expected normalized range\n";
    manifest.add_input(ckpt_path);
    manifest.add_input(in_dir);
    manifest.add_output(out_dir);
    manifest.write(cfg.report_dir);
    std::cout << "denoised " << d.shots.size() << " frames to " << out_dir << "\n";
    return 0;
}

int cmd_train_classifier(const cli::RunConfig& cfg, const std::string& in_dir,
                         const std::string& kind_name, const std::string& source,
                         bool shared, const std::string& models_out) {
    cli::ManifestWriter manifest("train-classifier", cli::config_to_json(cfg));
    const simcam::Dataset d = load_dataset_checked(in_dir);
    check_source(d, source);
    const classify::Kind kind = classify::kind_from_name(kind_name);

    const SplitFrames train = frames_for(d, d.train_idx, source);
    const SplitFrames val = frames_for(d, d.val_idx, source);
    classify::NnHyper hyper = cfg.classifier;
    hyper.seed = cfg.seed;

    std::vector<classify::ClassifierModel> models;
    if (shared) {
        models.push_back(classify::train_shared(kind, train.frames, train.labels,
                                                val.frames, val.labels, d.geometry,
                                                hyper));
    } else {
        models = classify::train_per_site(kind, train.frames, train.labels, val.frames,
                                          val.labels, d.geometry, hyper);
    }
    for (auto& m : models)
        m.source = source;
    ensure_parent(models_out);
    classify::save_models(models, models_out);
    manifest.add_input(in_dir);
    manifest.add_output(models_out);
    manifest.write(cfg.report_dir);
    std::cout << "trained " << models.size() << " " << kind_name << " model(s) on "
              << source << " -> " << models_out << "\n";
    return 0;
}

int cmd_eval(const cli::RunConfig& cfg, const std::string& in_dir,
             const std::string& models_path, const std::string& source,
             const std::string& split, const std::string& baseline_path,
             const std::string& report_out) {
    cli::ManifestWriter manifest("eval", cli::config_to_json(cfg));
    const simcam::Dataset d = load_dataset_checked(in_dir);
    check_source(d, source);
    const auto models = load_models_checked(models_path);
    const SplitFrames test = frames_for(d, d.split(split), source);

    std::optional<double> baseline_delta;
    std::string baseline_name;
    if (!baseline_path.empty()) {
        require_artifact(baseline_path, "baseline report");
        std::ifstream in(baseline_path);
        const json b = json::parse(in);
        baseline_delta = b.at("delta").get<double>();
        baseline_name = b.value("name", baseline_path);
    }

    const auto report = classify::evaluate(models, test.frames, test.labels, d.geometry,
                                           baseline_delta, baseline_name);
    ensure_parent(report_out + ".csv");
    write_eval_csv(report, report_out + ".csv");
    json j = report_to_json(report);
    j["name"] = fs::path(report_out).filename().string();
    j["source"] = source;
    j["split"] = split;
    j["models"] = models_path;
    write_json(j, report_out + ".json");

    manifest.add_input(in_dir);
    manifest.add_input(models_path);
    manifest.add_output(report_out + ".csv");
    manifest.add_output(report_out + ".json");
    manifest.write(cfg.report_dir);
    std::cout << "delta " << report.delta;
    if (report.eta)
        std::cout << " eta " << *report.eta;
    std::cout << " -> " << report_out << ".csv\n";
    return 0;
}

int cmd_postselect(const cli::RunConfig& cfg, const std::string& in_dir,
                   const std::string& models_path, const std::string& source,
                   const std::vector<double>& taus, const std::string& report_out) {
    cli::ManifestWriter manifest("postselect", cli::config_to_json(cfg));
    const simcam::Dataset d = load_dataset_checked(in_dir);
    check_source(d, source);
    const auto models = load_models_checked(models_path);
    const SplitFrames test = frames_for(d, d.test_idx, source);

    // pooled decision scores over every (shot, site) measurement
    std::vector<double> scores;
    std::vector<uint8_t> predictions, truth;
    for (size_t f = 0; f < test.frames.size(); ++f) {
        const auto decisions =
            classify::classify_array(models, test.frames[f], d.geometry);
        for (int s = 0; s < d.geometry.sites(); ++s) {
            scores.push_back(decisions[s].score);
            predictions.push_back(decisions[s].prediction);
            truth.push_back(test.labels[f][s]);
        }
    }
    const auto gmm = classify::gmm_fit(scores);

    long long unfiltered_err = 0;
    for (size_t i = 0; i < truth.size(); ++i)
        unfiltered_err += predictions[i] != truth[i];
    const double unfiltered_delta =
        static_cast<double>(unfiltered_err) / static_cast<double>(truth.size());

    ensure_parent(report_out + ".csv");
    CsvWriter csv({"tau", "retained_fraction", "delta_retained", "delta_unfiltered"});
    json rows = json::array();
    for (double tau : taus) {
        const auto filt = classify::confidence_filter(scores, gmm, tau);
        long long err = 0, kept = 0;
        for (size_t i = 0; i < truth.size(); ++i)
            if (filt.retained[i]) {
                ++kept;
                err += predictions[i] != truth[i];
            }
        const double delta_retained =
            kept ? static_cast<double>(err) / static_cast<double>(kept) : 0.0;
        csv.cell(tau).cell(filt.retained_fraction).cell(delta_retained)
            .cell(unfiltered_delta);
        csv.end_row();
        rows.push_back({{"tau", tau},
                        {"retained_fraction", filt.retained_fraction},
                        {"delta_retained", delta_retained}});
    }
    csv.write(report_out + ".csv");
    json j;
    j["gmm"] = {{"w0", gmm.w0}, {"w1", gmm.w1}, {"m0", gmm.m0}, {"m1", gmm.m1},
                {"v0", gmm.v0}, {"v1", gmm.v1}, {"iterations", gmm.iterations}};
    j["delta_unfiltered"] = unfiltered_delta;
    j["taus"] = rows;
    write_json(j, report_out + ".json");

    manifest.add_input(in_dir);
    manifest.add_input(models_path);
    manifest.add_output(report_out + ".csv");
    manifest.write(cfg.report_dir);
    std::cout << "postselect report -> " << report_out << ".csv\n";
    return 0;
}

int cmd_sweep_duration(const cli::RunConfig& cfg, const std::string& in_dir,
                       const std::string& ckpt_path, const std::string& report_out) {
    cli::ManifestWriter manifest("sweep-duration", cli::config_to_json(cfg));
    const simcam::Dataset d = load_dataset_checked(in_dir);
    const denoise::Checkpoint ckpt = load_checkpoint_checked(ckpt_path);

    classify::NnHyper hyper = cfg.classifier;
    hyper.seed = cfg.seed;

    ensure_parent(report_out + ".csv");
    CsvWriter csv({"duration_long_ms", "duration_short_ms", "delta_threshold_raw",
                   "delta_fnn_denoised", "eta"});
    json rows = json::array();
    for (double dur : d.durations_ms) {
        auto of_duration = [&](const std::vector<size_t>& ids) {
            std::vector<size_t> out;
            for (size_t i : ids)
                if (d.shots[i].duration_ms == dur)
                    out.push_back(i);
            return out;
        };
        const auto tr = of_duration(d.train_idx);
        const auto va = of_duration(d.val_idx);
        const auto te = of_duration(d.test_idx);
        if (tr.empty() || va.empty() || te.empty())
            throw std::runtime_error("sweep-duration: a split has no shots at duration " +
                                     std::to_string(dur));

        const SplitFrames raw_tr = frames_for(d, tr, "raw");
        const SplitFrames raw_te = frames_for(d, te, "raw");
        const auto thr =
            classify::train_per_site(classify::Kind::Threshold, raw_tr.frames,
                                     raw_tr.labels, raw_tr.frames, raw_tr.labels,
                                     d.geometry, hyper);
        const auto thr_rep =
            classify::evaluate(thr, raw_te.frames, raw_te.labels, d.geometry);

        const SplitFrames raw_va = frames_for(d, va, "raw");
        const auto den_tr = run_denoiser(ckpt, raw_tr.frames, cfg.train.batch_size);
        const auto den_va = run_denoiser(ckpt, raw_va.frames, cfg.train.batch_size);
        const auto den_te = run_denoiser(ckpt, raw_te.frames, cfg.train.batch_size);
        // eta is undefined when the baseline has no errors on this split
        const std::optional<double> baseline =
            thr_rep.delta > 0.0 ? std::optional<double>(thr_rep.delta) : std::nullopt;
        const auto fnn =
            classify::train_per_site(classify::Kind::Fnn, den_tr, raw_tr.labels, den_va,
                                     raw_va.labels, d.geometry, hyper);
        const auto fnn_rep = classify::evaluate(fnn, den_te, raw_te.labels, d.geometry,
                                                baseline, "threshold-raw");

        const double short_ms = dur * d.optics.attenuation;
        csv.cell(dur).cell(short_ms).cell(thr_rep.delta).cell(fnn_rep.delta);
        if (fnn_rep.eta)
            csv.cell(*fnn_rep.eta);
        else
            csv.cell("");
        csv.end_row();
        rows.push_back({{"duration_long_ms", dur},
                        {"duration_short_ms", short_ms},
                        {"delta_threshold_raw", thr_rep.delta},
                        {"delta_fnn_denoised", fnn_rep.delta}});
    }
    csv.write(report_out + ".csv");
    write_json(json{{"rows", rows}}, report_out + ".json");
    manifest.add_input(in_dir);
    manifest.add_input(ckpt_path);
    manifest.add_output(report_out + ".csv");
    manifest.write(cfg.report_dir);
    std::cout << "duration sweep -> " << report_out << ".csv\n";
    return 0;
}

int cmd_qec_sweep(const cli::RunConfig& cfg, const std::string& p_meas_csv,
                  const std::string& p_col, std::vector<double> durations,
                  std::vector<double> p_meas, const std::string& report_out) {
    cli::ManifestWriter manifest("qec-sweep", cli::config_to_json(cfg));
    if (!p_meas_csv.empty()) {
        require_artifact(p_meas_csv, "p_meas csv");
        const auto table = cli::read_csv(p_meas_csv);
        durations = table.numeric_column("duration_short_ms");
        p_meas = table.numeric_column(p_col);
    }
    if (durations.empty() || durations.size() != p_meas.size())
        throw std::invalid_argument("qec-sweep: need matching durations and p_meas");

    qec::NoiseCurves noise(durations, p_meas, cfg.qec.coherence);
    qec::RepCodeConfig rep = cfg.qec.rep;
    rep.seed = cfg.seed;
    const auto sweep = qec::ler_repetition_sweep(durations, noise, rep, cfg.qec.timing);
    const double best = qec::find_optimal_duration(sweep);

    ensure_parent(report_out + ".csv");
    CsvWriter csv({"duration_short_ms", "p_meas", "p_flip", "ler", "ci95", "shots"});
    for (const auto& pt : sweep) {
        csv.cell(pt.duration_ms).cell(pt.p_meas).cell(pt.p_flip).cell(pt.ler)
            .cell(1.96 * pt.std_error).cell(pt.shots);
        csv.end_row();
    }
    csv.write(report_out + ".csv");

    json j;
    j["optimal_duration_ms"] = best;
    j["distance"] = rep.distance;
    j["rounds"] = rep.rounds;
    j["shots"] = rep.shots;
    j["t1_s"] = cfg.qec.coherence.t1;
    j["t2_s"] = cfg.qec.coherence.t2;
    j["p_meas_fit"] = {{"a", noise.fit().a}, {"b", noise.fit().b}, {"c", noise.fit().c}};
    write_json(j, report_out + ".json");

    if (!p_meas_csv.empty())
        manifest.add_input(p_meas_csv);
    manifest.add_output(report_out + ".csv");
    manifest.write(cfg.report_dir);
    std::cout << "optimal duration " << best << " ms -> " << report_out << ".csv\n";
    return 0;
}

int cmd_timing(const qec::TimingParams& t, const std::string& mode,
               const std::string& report_out) {
    double value = 0.0;
    if (mode == "unpipelined")
        value = qec::t_unpipelined(t);
    else if (mode == "pipelined")
        value = qec::t_pipelined(t);
    else if (mode == "cycle")
        value = qec::qec_cycle_time(t);
    else
        value = qec::exec_time_estimate(t);
    std::cout << CsvWriter::format_double(value) << "\n";

    if (!report_out.empty()) {
        json j;
        j["mode"] = mode;
        j["seconds"] = value;
        j["unpipelined_s"] = qec::t_unpipelined(t);
        j["pipelined_s"] = qec::t_pipelined(t);
        j["gap_s"] = qec::pipeline_gap(t);
        j["cycle_s"] = qec::qec_cycle_time(t);
        j["params"] = {{"d_rounds", t.d_rounds},
                       {"n_tgates", t.n_tgates},
                       {"t_gate_s", t.t_gate},
                       {"t_readout_s", t.t_readout},
                       {"t_classification_s", t.t_classification},
                       {"t_denoise_s", t.t_denoise},
                       {"t_reset_s", t.t_reset}};
        write_json(j, report_out);
    }
    return 0;
}

int cmd_bench(const cli::RunConfig& cfg, const std::string& mode,
              const std::string& ckpt_path, const std::string& in_dir,
              const std::string& report_out) {
    cli::ManifestWriter manifest("bench", cli::config_to_json(cfg));
    const denoise::Checkpoint ckpt = load_checkpoint_checked(ckpt_path);
    const auto env = bench::environment();

    ensure_parent(report_out + ".csv");
    if (mode == "batch" || mode == "parallel") {
        std::vector<bench::BenchResult> results;
        if (mode == "batch")
            results = bench::bench_batch(ckpt, cfg.geometry.image_h, cfg.geometry.image_w,
                                         cfg.bench.batch_sizes, cfg.bench.iters,
                                         cfg.bench.warmup, cfg.seed);
        else
            results = bench::bench_parallel(ckpt, cfg.geometry.image_h,
                                            cfg.geometry.image_w, cfg.bench.instances,
                                            cfg.bench.iters, cfg.seed);
        CsvWriter csv({"mode", "config", "throughput_img_s", "per_instance_throughput",
                       "latency_mean_s", "latency_p50_s", "latency_p99_s", "warmup",
                       "iters", "skipped"});
        for (const auto& r : results) {
            csv.cell(r.mode).cell(r.config).cell(r.throughput)
                .cell(r.per_instance_throughput).cell(r.latency_mean_s)
                .cell(r.latency_p50_s).cell(r.latency_p99_s).cell(r.warmup)
                .cell(r.iters).cell(static_cast<long long>(r.skipped));
            csv.end_row();
        }
        csv.write(report_out + ".csv");
    } else if (mode == "scaling") {
        simcam::Dataset src = load_dataset_checked(in_dir);
        if (!src.norm)
            src.norm = ckpt.norm;
        const auto rows = bench::bench_scaling(ckpt, cfg.bench.grids, src,
                                               cfg.bench.frames_per_grid, cfg.seed);
        CsvWriter csv({"grid", "psnr_db", "ssim", "mean_l1", "latency_s", "frames"});
        for (const auto& r : rows) {
            csv.cell(r.grid).cell(r.psnr_db).cell(r.ssim).cell(r.mean_l1)
                .cell(r.latency_s).cell(r.frames);
            csv.end_row();
        }
        csv.write(report_out + ".csv");
        manifest.add_input(in_dir);
    } else {
        throw std::invalid_argument("bench: unknown mode " + mode);
    }

    json envj;
    envj["cpu_model"] = env.cpu_model;
    envj["hardware_threads"] = env.hardware_threads;
    envj["openmp"] = env.openmp;
    envj["mode"] = mode;
    write_json(envj, report_out + ".env.json");

    manifest.add_input(ckpt_path);
    manifest.add_output(report_out + ".csv");
    manifest.write(cfg.report_dir);
    std::cout << "bench " << mode << " -> " << report_out << ".csv\n";
    return 0;
}

int cmd_report(const std::string& csv_path, const std::string& x_col,
               const std::string& y_cols, const std::string& title, bool log_y,
               const std::string& out_svg) {
    require_artifact(csv_path, "csv");
    const auto table = cli::read_csv(csv_path);
    std::vector<std::string> ys;
    std::stringstream ss(y_cols);
    std::string item;
    while (std::getline(ss, item, ','))
        ys.push_back(item);
    ensure_parent(out_svg);
    cli::plot_csv(table, x_col, ys,
                  title.empty() ? fs::path(csv_path).stem().string() : title, out_svg,
                  log_y);
    std::cout << "plot -> " << out_svg << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"atomread: neutral-atom readout denoising and QEC latency pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    uint64_t seed_flag = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option_function<uint64_t>(
           "--seed", [&](uint64_t s) { seed_flag = s; seed_set = true; },
           "global seed override");
    app.add_option("--out", out_dir, "report directory override");

    auto load_cfg = [&]() {
        cli::RunConfig cfg = config_path.empty() ? cli::default_config("desk-5um")
                                                 : cli::load_config(config_path);
        if (seed_set)
            cfg.seed = seed_flag;
        if (!out_dir.empty())
            cfg.report_dir = out_dir;
        return cfg;
    };

    auto* validate = app.add_subcommand("validate-config", "check config invariants");

    auto* gen = app.add_subcommand("gen-data", "generate a paired-exposure dataset");
    std::string gen_out;
    bool gen_relabel = false;
    double gen_bright = -1, gen_dark = -1, gen_bg = -1, gen_psf = -1, gen_atten = -1;
    double gen_gain = -1, gen_read = -1, gen_bias = -1, gen_pbright = -1;
    std::vector<double> gen_durations;
    int gen_shots = -1;
    gen->add_option("--data-out", gen_out, "output dataset directory");
    gen->add_option("--durations", gen_durations, "long-path durations in ms");
    gen->add_option("--shots-per-duration", gen_shots);
    gen->add_option("--p-bright", gen_pbright);
    gen->add_option("--bright-rate", gen_bright);
    gen->add_option("--dark-rate", gen_dark);
    gen->add_option("--background-rate", gen_bg);
    gen->add_option("--psf-sigma", gen_psf);
    gen->add_option("--attenuation", gen_atten);
    gen->add_option("--em-gain", gen_gain);
    gen->add_option("--read-noise", gen_read);
    gen->add_option("--bias", gen_bias);
    gen->add_flag("--label-noise", gen_relabel, "relabel from the long-exposure path");
    int gen_rows = -1, gen_cols = -1, gen_pitch = -1, gen_patch = -1;
    int gen_imh = -1, gen_imw = -1, gen_oy = -1, gen_ox = -1;
    gen->add_option("--rows", gen_rows);
    gen->add_option("--cols", gen_cols);
    gen->add_option("--pitch", gen_pitch);
    gen->add_option("--patch", gen_patch);
    gen->add_option("--image-h", gen_imh);
    gen->add_option("--image-w", gen_imw);
    gen->add_option("--origin-y", gen_oy);
    gen->add_option("--origin-x", gen_ox);

    auto* stitch = app.add_subcommand("stitch", "tile site patches onto a larger lattice");
    std::string stitch_in, stitch_out, stitch_split = "test";
    int stitch_rows = 8, stitch_cols = 8, stitch_shots = 16;
    stitch->add_option("--in", stitch_in)->required();
    stitch->add_option("--data-out", stitch_out)->required();
    stitch->add_option("--rows", stitch_rows);
    stitch->add_option("--cols", stitch_cols);
    stitch->add_option("--shots", stitch_shots);
    stitch->add_option("--split", stitch_split, "source split: train|val|test|all");

    auto* traind = app.add_subcommand("train-denoiser", "train the conditional-GAN denoiser");
    std::string traind_in, traind_ckpt = "checkpoints/denoiser.ckpt";
    double traind_width = -1, traind_lr = -1, traind_lambda = -1;
    int traind_epochs = -1, traind_batch = -1, traind_dperiod = -1, traind_patience = -1;
    traind->add_option("--data", traind_in)->required();
    traind->add_option("--ckpt-out", traind_ckpt);
    traind->add_option("--width-mult", traind_width);
    traind->add_option("--epochs", traind_epochs);
    traind->add_option("--batch-size", traind_batch);
    traind->add_option("--lr", traind_lr);
    traind->add_option("--lambda-l1", traind_lambda);
    traind->add_option("--d-period", traind_dperiod);
    traind->add_option("--patience", traind_patience);

    auto* den = app.add_subcommand("denoise", "run the denoiser over a dataset");
    std::string den_ckpt, den_in, den_out;
    int den_batch = 16;
    den->add_option("--ckpt", den_ckpt)->required();
    den->add_option("--in", den_in)->required();
    den->add_option("--data-out", den_out)->required();
    den->add_option("--batch", den_batch);

    auto* trainc = app.add_subcommand("train-classifier", "train per-site state classifiers");
    std::string trainc_in, trainc_kind = "fnn", trainc_source = "raw",
                trainc_out = "checkpoints/classifier.model";
    bool trainc_shared = false;
    trainc->add_option("--data", trainc_in)->required();
    trainc->add_option("--kind", trainc_kind, "threshold|mf|fnn|mfnn|cnn");
    trainc->add_option("--source", trainc_source, "raw|denoised|long");
    trainc->add_option("--models-out", trainc_out);
    trainc->add_flag("--shared", trainc_shared, "one model pooled across sites");

    auto* eval = app.add_subcommand("eval", "evaluate classifiers on a split");
    std::string eval_in, eval_models, eval_source = "raw", eval_split = "test",
                eval_baseline, eval_out = "reports/eval";
    eval->add_option("--data", eval_in)->required();
    eval->add_option("--models", eval_models)->required();
    eval->add_option("--source", eval_source);
    eval->add_option("--split", eval_split);
    eval->add_option("--baseline", eval_baseline, "baseline eval JSON for eta");
    eval->add_option("--report-out", eval_out);

    auto* post = app.add_subcommand("postselect", "GMM confidence filtering of decision scores");
    std::string post_in, post_models, post_source = "raw", post_out = "reports/postselect";
    std::vector<double> post_taus{0.5, 0.9, 0.99, 0.999};
    post->add_option("--data", post_in)->required();
    post->add_option("--models", post_models)->required();
    post->add_option("--source", post_source);
    post->add_option("--tau", post_taus, "confidence cutoffs");
    post->add_option("--report-out", post_out);

    auto* sweep = app.add_subcommand("sweep-duration",
                                     "infidelity vs readout duration, raw vs denoised");
    std::string sweep_in, sweep_ckpt, sweep_out = "reports/duration_sweep";
    sweep->add_option("--data", sweep_in)->required();
    sweep->add_option("--ckpt", sweep_ckpt)->required();
    sweep->add_option("--report-out", sweep_out);

    auto* qecs = app.add_subcommand("qec-sweep", "repetition-code LER vs readout duration");
    std::string qecs_csv, qecs_pcol = "delta_fnn_denoised", qecs_out = "reports/qec_sweep";
    std::vector<double> qecs_durations, qecs_pmeas;
    int qecs_distance = -1, qecs_rounds = -1;
    long long qecs_shots = -1;
    double qecs_t1 = -1, qecs_t2 = -1;
    qecs->add_option("--p-meas-csv", qecs_csv, "duration sweep CSV");
    qecs->add_option("--p-meas-col", qecs_pcol);
    qecs->add_option("--durations", qecs_durations, "short durations in ms");
    qecs->add_option("--p-meas", qecs_pmeas);
    qecs->add_option("--distance", qecs_distance);
    qecs->add_option("--rounds", qecs_rounds);
    qecs->add_option("--shots", qecs_shots);
    qecs->add_option("--t1", qecs_t1, "seconds");
    qecs->add_option("--t2", qecs_t2, "seconds");
    qecs->add_option("--report-out", qecs_out);

    auto* timing = app.add_subcommand("timing", "cycle-time and pipelining algebra");
    qec::TimingParams tparams;
    bool t_unpip = false, t_pip = false, t_cycle = false, t_exec = false;
    std::string timing_out;
    timing->add_option("--d", tparams.d_rounds);
    timing->add_option("--n-tgates", tparams.n_tgates);
    timing->add_option("--t-readout", tparams.t_readout, "seconds");
    timing->add_option("--t-gate", tparams.t_gate, "seconds");
    timing->add_option("--t-class", tparams.t_classification, "seconds");
    timing->add_option("--t-denoise", tparams.t_denoise, "seconds");
    timing->add_option("--t-reset", tparams.t_reset, "seconds");
    timing->add_flag("--unpipelined", t_unpip);
    timing->add_flag("--pipelined", t_pip);
    timing->add_flag("--cycle", t_cycle);
    timing->add_flag("--exec", t_exec);
    timing->add_option("--report-out", timing_out);

    auto* benchc = app.add_subcommand("bench", "denoiser throughput/latency benchmarks");
    std::string bench_mode = "batch", bench_ckpt, bench_in, bench_out = "reports/bench";
    benchc->add_option("--mode", bench_mode, "batch|parallel|scaling");
    benchc->add_option("--ckpt", bench_ckpt)->required();
    benchc->add_option("--in", bench_in, "source dataset (scaling mode)");
    benchc->add_option("--report-out", bench_out);

    auto* rep = app.add_subcommand("report", "render a CSV to an SVG plot");
    std::string rep_csv, rep_x, rep_y, rep_title, rep_svg = "reports/plot.svg";
    bool rep_logy = false;
    rep->add_option("--csv", rep_csv)->required();
    rep->add_option("--x", rep_x)->required();
    rep->add_option("--y", rep_y, "comma-separated y columns")->required();
    rep->add_option("--title", rep_title);
    rep->add_flag("--log-y", rep_logy);
    rep->add_option("--svg-out", rep_svg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return fail_with(2, std::string("usage error: ") + e.get_name());
    }

    cli::RunConfig cfg;
    try {
        cfg = load_cfg();
    } catch (const std::exception& e) {
        return fail_with(2, e.what(), "config");
    }

    try {
        if (app.got_subcommand(validate))
            return cmd_validate(cfg);

        if (app.got_subcommand(gen)) {
            if (!gen_durations.empty())
                cfg.data.durations_ms = gen_durations;
            if (gen_shots >= 0)
                cfg.data.shots_per_duration = gen_shots;
            if (gen_pbright >= 0)
                cfg.data.p_bright = gen_pbright;
            if (gen_bright >= 0)
                cfg.optics.bright_rate = gen_bright;
            if (gen_dark >= 0)
                cfg.optics.dark_rate = gen_dark;
            if (gen_bg >= 0)
                cfg.optics.background_rate = gen_bg;
            if (gen_psf >= 0)
                cfg.optics.psf_sigma_px = gen_psf;
            if (gen_atten >= 0)
                cfg.optics.attenuation = gen_atten;
            if (gen_gain >= 0)
                cfg.optics.em_gain = gen_gain;
            if (gen_read >= 0)
                cfg.optics.read_noise = gen_read;
            if (gen_bias >= 0)
                cfg.optics.bias = gen_bias;
            if (gen_rows > 0)
                cfg.geometry.rows = gen_rows;
            if (gen_cols > 0)
                cfg.geometry.cols = gen_cols;
            if (gen_pitch > 0)
                cfg.geometry.pitch_px = gen_pitch;
            if (gen_patch > 0)
                cfg.geometry.patch_px = gen_patch;
            if (gen_imh > 0)
                cfg.geometry.image_h = gen_imh;
            if (gen_imw > 0)
                cfg.geometry.image_w = gen_imw;
            if (gen_oy >= 0)
                cfg.geometry.origin_y = gen_oy;
            if (gen_ox >= 0)
                cfg.geometry.origin_x = gen_ox;
            const auto errors = cli::validate_config(cfg);
            if (!errors.empty())
                return fail_with(2, errors.front().message, errors.front().field);
            return cmd_gen_data(cfg, gen_out.empty() ? cfg.data_dir : gen_out, gen_relabel);
        }
        if (app.got_subcommand(stitch))
            return cmd_stitch(cfg, stitch_in, stitch_rows, stitch_cols, stitch_shots,
                              stitch_out, stitch_split);
        if (app.got_subcommand(traind)) {
            if (traind_width > 0) {
                cfg.gen.width_mult = traind_width;
                cfg.disc.width_mult = traind_width;
            }
            if (traind_epochs > 0)
                cfg.train.epochs = traind_epochs;
            if (traind_batch > 0)
                cfg.train.batch_size = traind_batch;
            if (traind_lr > 0)
                cfg.train.lr = traind_lr;
            if (traind_lambda >= 0)
                cfg.train.lambda_l1 = traind_lambda;
            if (traind_dperiod > 0)
                cfg.train.d_update_period = traind_dperiod;
            if (traind_patience >= 0)
                cfg.train.early_stop_patience = traind_patience;
            cfg.train.seed = cfg.seed;
            return cmd_train_denoiser(cfg, traind_in, traind_ckpt);
        }
        if (app.got_subcommand(den))
            return cmd_denoise(cfg, den_ckpt, den_in, den_out, den_batch);
        if (app.got_subcommand(trainc))
            return cmd_train_classifier(cfg, trainc_in, trainc_kind, trainc_source,
                                        trainc_shared, trainc_out);
        if (app.got_subcommand(eval))
            return cmd_eval(cfg, eval_in, eval_models, eval_source, eval_split,
                            eval_baseline, eval_out);
        if (app.got_subcommand(post))
            return cmd_postselect(cfg, post_in, post_models, post_source, post_taus,
                                  post_out);
        if (app.got_subcommand(sweep))
            return cmd_sweep_duration(cfg, sweep_in, sweep_ckpt, sweep_out);
        if (app.got_subcommand(qecs)) {
            if (qecs_distance > 0)
                cfg.qec.rep.distance = qecs_distance;
            if (qecs_rounds > 0)
                cfg.qec.rep.rounds = qecs_rounds;
            if (qecs_shots > 0)
                cfg.qec.rep.shots = qecs_shots;
            if (qecs_t1 > 0)
                cfg.qec.coherence.t1 = qecs_t1;
            if (qecs_t2 > 0)
                cfg.qec.coherence.t2 = qecs_t2;
            return cmd_qec_sweep(cfg, qecs_csv, qecs_pcol, qecs_durations, qecs_pmeas,
                                 qecs_out);
        }
        if (app.got_subcommand(timing)) {
            std::string mode = "unpipelined";
            if (t_pip)
                mode = "pipelined";
            else if (t_cycle)
                mode = "cycle";
            else if (t_exec)
                mode = "exec";
            return cmd_timing(tparams, mode, timing_out);
        }
        if (app.got_subcommand(benchc))
            return cmd_bench(cfg, bench_mode, bench_ckpt, bench_in, bench_out);
        if (app.got_subcommand(rep))
            return cmd_report(rep_csv, rep_x, rep_y, rep_title, rep_logy, rep_svg);

        return fail_with(2, "unknown command");
    } catch (const MissingArtifact& e) {
        return fail_with(3, e.what());
    } catch (const std::invalid_argument& e) {
        return fail_with(2, e.what());
    } catch (const std::exception& e) {
        return fail_with(1, e.what());
    }
}
