#include "semloc/configs.hpp"

#include "semloc/error.hpp"

namespace semloc {

const std::set<std::string>& train_config_keys() {
    static const std::set<std::string> keys = {
        "batch_n",      "temperature",    "lr",         "epochs",        "seed",     "momentum",
        "cosine_decay", "loss_reduction", "finetune_mode", "min_crop_ratio", "max_rotation_deg", "input_w",
        "input_h",      "fill_class",     "augment_seed", "conv_channels", "embed_dim", "proj_dim",
        "similarity"};
    return keys;
}

const std::set<std::string>& scene_spec_keys() {
    static const std::set<std::string> keys = {
        "seed",        "n_scenes",     "id_prefix",     "palette",        "pano_w",           "pano_h",
        "view_w",      "view_h",       "view_count",    "fov_deg",        "grid_spacing_m",   "pano_jitter_m",
        "queries_per_scene", "yaw_jitter_deg", "position_jitter_m", "flip_prob", "object_change_prob",
        "corruption",  "top_s"};
    return keys;
}

TrainConfig train_config_from(const KeyValueConfig& kv, TrainConfig c) {
    c.batch_n = static_cast<int>(kv.get_int("batch_n", c.batch_n));
    c.temperature = kv.get_double("temperature", c.temperature);
    c.lr = kv.get_double("lr", c.lr);
    c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
    c.momentum = kv.get_double("momentum", c.momentum);
    c.cosine_decay = kv.get_bool("cosine_decay", c.cosine_decay);
    const auto reduction = kv.get_string("loss_reduction", c.reduction == LossReduction::mean ? "mean" : "sum");
    if (reduction == "mean") {
        c.reduction = LossReduction::mean;
    } else if (reduction == "sum") {
        c.reduction = LossReduction::sum;
    } else {
        throw Error(ErrorKind::config, "loss_reduction must be mean or sum");
    }
    c.finetune_mode = parse_finetune_mode(kv.get_string("finetune_mode", to_string(c.finetune_mode)));
    c.augment.min_crop_ratio = kv.get_double("min_crop_ratio", c.augment.min_crop_ratio);
    c.augment.max_rotation_deg = kv.get_double("max_rotation_deg", c.augment.max_rotation_deg);
    c.augment.out_w = static_cast<int>(kv.get_int("input_w", c.augment.out_w));
    c.augment.out_h = static_cast<int>(kv.get_int("input_h", c.augment.out_h));
    const auto fill = kv.get_int("fill_class", c.augment.fill_class);
    if (fill < 0 || fill > 254) throw Error(ErrorKind::config, "fill_class must lie in [0, 254]");
    c.augment.fill_class = static_cast<ClassId>(fill);
    c.augment.seed = static_cast<std::uint64_t>(kv.get_int("augment_seed", static_cast<long long>(c.augment.seed)));
    c.model.conv_channels = kv.get_int_list("conv_channels", c.model.conv_channels);
    c.model.embed_dim = static_cast<int>(kv.get_int("embed_dim", c.model.embed_dim));
    c.model.proj_dim = static_cast<int>(kv.get_int("proj_dim", c.model.proj_dim));
    const auto sim = kv.get_string("similarity", c.model.cosine ? "cosine" : "dot");
    if (sim != "cosine" && sim != "dot") throw Error(ErrorKind::config, "similarity must be cosine or dot");
    c.model.cosine = sim == "cosine";
    for (int ch : c.model.conv_channels) {
        if (ch <= 0) throw Error(ErrorKind::config, "conv_channels must be positive");
    }
    if (c.model.embed_dim <= 0 || c.model.proj_dim <= 0) throw Error(ErrorKind::config, "embedding dims must be positive");
    c.validate();
    return c;
}

SceneSpec scene_spec_from(const KeyValueConfig& kv, SceneSpec s) {
    s.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(s.seed)));
    s.n_scenes = static_cast<int>(kv.get_int("n_scenes", s.n_scenes));
    s.id_prefix = kv.get_string("id_prefix", s.id_prefix);
    if (kv.has("palette")) s.palette = ClassPalette::load(kv.get_string("palette", ""));
    s.pano_w = static_cast<int>(kv.get_int("pano_w", s.pano_w));
    s.pano_h = static_cast<int>(kv.get_int("pano_h", s.pano_h));
    s.view_w = static_cast<int>(kv.get_int("view_w", s.view_w));
    s.view_h = static_cast<int>(kv.get_int("view_h", s.view_h));
    s.view_count = static_cast<int>(kv.get_int("view_count", s.view_count));
    s.fov_deg = kv.get_double("fov_deg", s.fov_deg);
    s.grid_spacing_m = kv.get_double("grid_spacing_m", s.grid_spacing_m);
    s.pano_jitter_m = kv.get_double("pano_jitter_m", s.pano_jitter_m);
    s.queries_per_scene = static_cast<int>(kv.get_int("queries_per_scene", s.queries_per_scene));
    s.yaw_jitter_deg = kv.get_double("yaw_jitter_deg", s.yaw_jitter_deg);
    s.position_jitter_m = kv.get_double("position_jitter_m", s.position_jitter_m);
    s.flip_prob = kv.get_double("flip_prob", s.flip_prob);
    s.object_change_prob = kv.get_double("object_change_prob", s.object_change_prob);
    s.corruption = kv.get_double("corruption", s.corruption);
    s.top_s = static_cast<int>(kv.get_int("top_s", s.top_s));
    s.validate();
    return s;
}

}  // namespace semloc
