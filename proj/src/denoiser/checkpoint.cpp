#include "atomread/core/container.hpp"
#include "atomread/denoiser/denoiser.hpp"

namespace atomread::denoise {

namespace {

nlohmann::json train_config_to_json(const TrainConfig& tc) {
    return {{"lr", tc.lr},
            {"beta1", tc.beta1},
            {"beta2", tc.beta2},
            {"batch_size", tc.batch_size},
            {"epochs", tc.epochs},
            {"lambda_l1", tc.lambda_l1},
            {"label_real", tc.label_real},
            {"label_fake", tc.label_fake},
            {"d_update_period", tc.d_update_period},
            {"cosine_lr", tc.cosine_lr},
            {"early_stop_patience", tc.early_stop_patience},
            {"seed", tc.seed},
            {"lambda_ssim", tc.lambda_ssim},
            {"lambda_mse", tc.lambda_mse}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig tc;
    tc.lr = j.at("lr");
    tc.beta1 = j.at("beta1");
    tc.beta2 = j.at("beta2");
    tc.batch_size = j.at("batch_size");
    tc.epochs = j.at("epochs");
    tc.lambda_l1 = j.at("lambda_l1");
    tc.label_real = j.at("label_real");
    tc.label_fake = j.at("label_fake");
    tc.d_update_period = j.at("d_update_period");
    tc.cosine_lr = j.at("cosine_lr");
    tc.early_stop_patience = j.at("early_stop_patience");
    tc.seed = j.at("seed");
    tc.lambda_ssim = j.at("lambda_ssim");
    tc.lambda_mse = j.at("lambda_mse");
    return tc;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    Container c;
    c.manifest["kind"] = "denoiser-checkpoint";
    c.manifest["version"] = ckpt.format_version;
    c.manifest["gen_config"] = {{"width_mult", ckpt.gen_config.width_mult},
                                {"residual_blocks", ckpt.gen_config.residual_blocks},
                                {"use_norm", ckpt.gen_config.use_norm}};
    c.manifest["disc_config"] = {{"width_mult", ckpt.disc_config.width_mult},
                                 {"dropout_rate", ckpt.disc_config.dropout_rate},
                                 {"leaky_slope", ckpt.disc_config.leaky_slope}};
    c.manifest["train_config"] = train_config_to_json(ckpt.train_config);
    c.manifest["norm"] = {{"mu", ckpt.norm.mu},
                          {"i_min", ckpt.norm.i_min},
                          {"i_max", ckpt.norm.i_max}};
    c.manifest["epoch"] = ckpt.epoch;
    c.manifest["best_val_l1"] = ckpt.best_val_l1;

    for (const auto* blk : ckpt.generator.blocks()) {
        c.add_blob("gen." + blk->layer.name + ".w", blk->layer.w);
        c.add_blob("gen." + blk->layer.name + ".b", blk->layer.b);
    }
    for (const auto* blk : ckpt.discriminator.blocks()) {
        c.add_blob("disc." + blk->layer.name + ".w", blk->layer.w);
        c.add_blob("disc." + blk->layer.name + ".b", blk->layer.b);
    }
    save_container(c, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    const Container c = load_container(path);
    if (c.manifest.value("kind", "") != std::string("denoiser-checkpoint"))
        throw std::runtime_error("not a denoiser checkpoint: " + path);

    Checkpoint ckpt;
    ckpt.format_version = c.manifest.at("version");
    ckpt.gen_config.width_mult = c.manifest.at("gen_config").at("width_mult");
    ckpt.gen_config.residual_blocks = c.manifest.at("gen_config").at("residual_blocks");
    ckpt.gen_config.use_norm = c.manifest.at("gen_config").value("use_norm", false);
    ckpt.disc_config.width_mult = c.manifest.at("disc_config").at("width_mult");
    ckpt.disc_config.dropout_rate = c.manifest.at("disc_config").at("dropout_rate");
    ckpt.disc_config.leaky_slope = c.manifest.at("disc_config").at("leaky_slope");
    ckpt.train_config = train_config_from_json(c.manifest.at("train_config"));
    ckpt.norm = simcam::NormStats{c.manifest.at("norm").at("mu"),
                                  c.manifest.at("norm").at("i_min"),
                                  c.manifest.at("norm").at("i_max")};
    ckpt.epoch = c.manifest.at("epoch");
    ckpt.best_val_l1 = c.manifest.at("best_val_l1");

    ckpt.generator = Generator(ckpt.gen_config);
    ckpt.discriminator = Discriminator(ckpt.disc_config);
    for (auto* blk : ckpt.generator.blocks()) {
        auto w = c.blob_as_double("gen." + blk->layer.name + ".w");
        auto b = c.blob_as_double("gen." + blk->layer.name + ".b");
        require(w.size() == blk->layer.w.size() && b.size() == blk->layer.b.size(),
                "checkpoint blob size mismatch: " + blk->layer.name);
        blk->layer.w = std::move(w);
        blk->layer.b = std::move(b);
    }
    for (auto* blk : ckpt.discriminator.blocks()) {
        auto w = c.blob_as_double("disc." + blk->layer.name + ".w");
        auto b = c.blob_as_double("disc." + blk->layer.name + ".b");
        require(w.size() == blk->layer.w.size() && b.size() == blk->layer.b.size(),
                "checkpoint blob size mismatch: " + blk->layer.name);
        blk->layer.w = std::move(w);
        blk->layer.b = std::move(b);
    }
    return ckpt;
}

}  // namespace atomread::denoise
