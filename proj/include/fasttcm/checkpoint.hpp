#pragma once

#include <filesystem>

#include "fasttcm/model.hpp"
#include "fasttcm/optim.hpp"
#include "fasttcm/serialize.hpp"

namespace ftcm {

// Checkpoint container sections: encoders, bridge, head, optimizer_state,
// config_hash.
inline void save_checkpoint(const std::filesystem::path& path, const FastTcm& model,
                            const Adam* optimizer = nullptr) {
    std::vector<ContainerSection> sections;
    sections.push_back({"encoders", pack_named_tensors(model.encoder_params())});
    sections.push_back({"bridge", pack_named_tensors(model.bridge_params())});
    sections.push_back({"head", pack_named_tensors(model.head_params())});
    sections.push_back(
        {"optimizer_state",
         pack_named_tensors(optimizer != nullptr ? optimizer->state() : NamedTensors{})});
    sections.push_back(
        {"config_hash", pack_string(hash_hex(model.config().hash()))});
    write_container_file(path, sections);
}

// Rebuilds a model from `cfg` and overwrites its tensors from the checkpoint.
// The stored config hash must match `cfg`.
inline FastTcm load_checkpoint(const std::filesystem::path& path, const Config& cfg,
                               Adam* optimizer = nullptr) {
    const auto sections = read_container_file(path);
    const std::string stored = unpack_string(find_section(sections, "config_hash").payload);
    if (stored != hash_hex(cfg.hash()))
        throw ConfigError("checkpoint config hash " + stored +
                          " does not match current config " + hash_hex(cfg.hash()));
    FastTcm model(cfg);
    model.load_encoder_state(unpack_named_tensors(find_section(sections, "encoders").payload));
    model.load_bridge_state(unpack_named_tensors(find_section(sections, "bridge").payload));
    model.load_head_state(unpack_named_tensors(find_section(sections, "head").payload));
    if (optimizer != nullptr) {
        const auto records =
            unpack_named_tensors(find_section(sections, "optimizer_state").payload);
        if (!records.empty()) optimizer->load_state(records);
    }
    return model;
}

} // namespace ftcm
