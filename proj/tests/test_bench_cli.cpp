#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "atomread/bench/bench.hpp"
#include "atomread/cli/config.hpp"
#include "atomread/cli/manifest.hpp"
#include "atomread/cli/plot.hpp"
#include "atomread/core/csv.hpp"

using namespace atomread;

namespace {

denoise::Checkpoint tiny_checkpoint() {
    denoise::Checkpoint ckpt;
    ckpt.gen_config = denoise::GeneratorConfig{0.05, 3};
    ckpt.generator = denoise::Generator(ckpt.gen_config);
    ckpt.generator.quantize_f32();
    ckpt.norm = simcam::NormStats{0.0, -1.0, 1.0};
    return ckpt;
}

}  // namespace

TEST_CASE("bench_batch reports sane numbers and never perturbs outputs") {
    const auto ckpt = tiny_checkpoint();
    const auto results = bench::bench_batch(ckpt, 16, 16, {1, 4}, 3, 1, 7);
    REQUIRE(results.size() == 2);
    for (const auto& r : results) {
        CHECK_FALSE(r.skipped);
        CHECK(r.throughput > 0.0);
        CHECK(r.latency_mean_s > 0.0);
        CHECK(r.latency_p99_s >= r.latency_p50_s);
        // throughput * mean latency ~ 1 per image within measurement noise
        CHECK(r.throughput * r.latency_mean_s == doctest::Approx(1.0).epsilon(0.5));
        CHECK(r.output_checksum ==
              bench::reference_checksum(ckpt, 16, 16, static_cast<int>(r.config), 3, 7));
    }
    CHECK_THROWS(bench::bench_batch(ckpt, 16, 16, {1}, 0, 1));
}

TEST_CASE("bench_parallel aggregates per-instance throughput") {
    const auto ckpt = tiny_checkpoint();
    // enough iterations that thread spawn cost is amortized
    const auto results = bench::bench_parallel(ckpt, 16, 16, {1, 2}, 400, 9);
    REQUIRE(results.size() == 2);
    CHECK(results[0].per_instance_throughput > 0.0);
    CHECK(results[1].throughput > 0.0);
    // aggregate throughput tracks n * per-instance
    for (const auto& r : results)
        CHECK(r.throughput ==
              doctest::Approx(r.per_instance_throughput * r.config).epsilon(0.25));
}

TEST_CASE("bench_scaling populates every metric per grid") {
    const auto ckpt = tiny_checkpoint();
    const auto preset = simcam::desk_preset_5um();
    auto src = simcam::generate_dataset(preset.geometry, preset.optics, {15.0}, 12,
                                        0.5, 21);
    src.norm = simcam::compute_norm_stats(src);
    const auto rows = bench::bench_scaling(ckpt, {4, 8}, src, 2, 3);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(std::isfinite(r.psnr_db));  // untrained toy net; only schema matters
        CHECK(r.ssim >= -1.0);
        CHECK(r.ssim <= 1.0);
        CHECK(r.mean_l1 >= 0.0);
        CHECK(r.latency_s > 0.0);
        CHECK(r.frames == 2);
    }

    const auto env = bench::environment();
    CHECK(env.hardware_threads >= 1);
    CHECK_FALSE(env.cpu_model.empty());
}

TEST_CASE("config presets, validation, and JSON round trip") {
    const auto c5 = cli::default_config("desk-5um");
    CHECK(c5.geometry.image_h == 28);
    const auto c9 = cli::default_config("desk-9um");
    CHECK(c9.geometry.image_h == 32);
    CHECK(cli::validate_config(c5).empty());
    CHECK(cli::validate_config(c9).empty());
    CHECK_THROWS(cli::default_config("nope"));

    // round trip through JSON preserves the fields
    const auto j = cli::config_to_json(c5);
    const auto back = cli::config_from_json(j);
    CHECK(back.geometry.pitch_px == c5.geometry.pitch_px);
    CHECK(back.optics.attenuation == c5.optics.attenuation);
    CHECK(back.train.lambda_l1 == c5.train.lambda_l1);

    // invariant violations are reported with field names
    auto bad = c5;
    bad.optics.attenuation = 0.0;
    auto errors = cli::validate_config(bad);
    REQUIRE_FALSE(errors.empty());
    CHECK(errors[0].field == "optics");

    bad = c5;
    bad.qec.coherence.t2 = 3.0 * bad.qec.coherence.t1;
    errors = cli::validate_config(bad);
    bool found = false;
    for (const auto& e : errors)
        found = found || e.message.find("CP bound") != std::string::npos;
    CHECK(found);
}

TEST_CASE("manifest hashes inputs and outputs") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "atomread_manifest_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "artifact.txt");
        f << "hello";
    }
    cli::ManifestWriter mw("test-cmd", nlohmann::json{{"seed", 1}});
    mw.add_output((dir / "artifact.txt").string());
    const auto path = mw.write(dir.string());

    std::ifstream in(path);
    const auto m = nlohmann::json::parse(in);
    CHECK(m.at("command") == "test-cmd");
    const std::string recorded = m.at("outputs").at((dir / "artifact.txt").string());
    CHECK(recorded == cli::hash_path((dir / "artifact.txt").string()));
    CHECK(m.at("wall_time_s").get<double>() >= 0.0);
    fs::remove_all(dir);
}

TEST_CASE("csv writer format is deterministic and plots render") {
    CsvWriter csv({"x", "y"});
    csv.cell(1.0).cell(0.5).end_row();
    csv.cell(2.0).cell(0.25).end_row();
    csv.cell(3.0).cell(0.125).end_row();
    const std::string s1 = csv.str();
    CHECK(s1 == "x,y\n1,0.5\n2,0.25\n3,0.125\n");

    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "atomread_plot_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto csv_path = (dir / "t.csv").string();
    csv.write(csv_path);

    const auto table = cli::read_csv(csv_path);
    CHECK(table.header.size() == 2);
    CHECK(table.numeric_column("y")[2] == doctest::Approx(0.125));

    const auto svg_path = (dir / "t.svg").string();
    cli::plot_csv(table, "x", {"y"}, "test", svg_path);
    std::ifstream svg(svg_path);
    std::string content((std::istreambuf_iterator<char>(svg)), {});
    CHECK(content.find("<svg") != std::string::npos);
    CHECK(content.find("polyline") != std::string::npos);
    fs::remove_all(dir);
}
