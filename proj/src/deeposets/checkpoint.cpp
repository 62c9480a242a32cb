#include "opicl/deeposets/checkpoint.hpp"

#include "opicl/errors.hpp"
#include "opicl/io/container.hpp"

namespace opicl::deeposets {

using nlohmann::json;

json arch_to_json(const ArchConfig& arch) {
    return {{"grid_n", arch.grid_n},         {"phi_hidden", arch.phi_hidden},
            {"latent_dim", arch.latent_dim}, {"branch_hidden", arch.branch_hidden},
            {"trunk_hidden", arch.trunk_hidden}, {"basis_dim", arch.basis_dim}};
}

ArchConfig arch_from_json(const json& j) {
    ArchConfig a;
    a.grid_n = j.at("grid_n").get<std::size_t>();
    a.phi_hidden = j.at("phi_hidden").get<std::vector<std::size_t>>();
    a.latent_dim = j.at("latent_dim").get<std::size_t>();
    a.branch_hidden = j.at("branch_hidden").get<std::vector<std::size_t>>();
    a.trunk_hidden = j.at("trunk_hidden").get<std::vector<std::size_t>>();
    a.basis_dim = j.at("basis_dim").get<std::size_t>();
    a.validate();
    return a;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const ArchConfig arch = arch_of(ckpt.params);
    json header = {{"kind", "checkpoint"},
                   {"schema_version", kCheckpointSchemaVersion},
                   {"arch", arch_to_json(arch)},
                   {"step", ckpt.step},
                   {"seed", ckpt.seed},
                   {"extra", ckpt.extra}};

    std::vector<double> payload;
    payload.reserve(ckpt.params.parameter_count() * (ckpt.optimizer ? 3 : 1));
    const auto blocks = ckpt.params.blocks();
    for (const auto& b : blocks) payload.insert(payload.end(), b.begin(), b.end());

    if (ckpt.optimizer) {
        const ndmath::AdamState& s = *ckpt.optimizer;
        if (s.first_moment.size() != blocks.size() || s.second_moment.size() != blocks.size()) {
            throw ShapeError("write_checkpoint: optimizer state does not match parameter blocks");
        }
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            if (s.first_moment[i].size() != blocks[i].size() || s.second_moment[i].size() != blocks[i].size()) {
                throw ShapeError("write_checkpoint: optimizer block " + std::to_string(i) + " has the wrong size");
            }
        }
        header["optimizer"] = {
            {"beta1", s.beta1}, {"beta2", s.beta2}, {"epsilon", s.epsilon}, {"step_count", s.step_count}};
        for (const auto& m : s.first_moment) payload.insert(payload.end(), m.begin(), m.end());
        for (const auto& v : s.second_moment) payload.insert(payload.end(), v.begin(), v.end());
    }
    if (ckpt.sampler) {
        header["sampler"] = {
            {"seed", ckpt.sampler->seed}, {"stream_id", ckpt.sampler->stream_id}, {"position", ckpt.sampler->position}};
    }
    io::write_container(path, std::move(header), payload);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    const io::Container c = io::read_container(path);
    io::expect_kind(c.header, "checkpoint", kCheckpointSchemaVersion);
    Checkpoint ckpt;
    try {
        const ArchConfig arch = arch_from_json(c.header.at("arch"));
        ndmath::Rng shape_rng(0, 0);
        ckpt.params = init_params(arch, shape_rng);
        ckpt.step = c.header.at("step").get<std::uint64_t>();
        ckpt.seed = c.header.at("seed").get<std::uint64_t>();
        ckpt.extra = c.header.value("extra", json::object());

        io::PayloadReader reader(c.payload);
        auto blocks = ckpt.params.blocks();
        for (auto& b : blocks) reader.read_into(b);

        if (c.header.contains("optimizer")) {
            const json& o = c.header["optimizer"];
            ndmath::AdamState s = ndmath::AdamState::for_blocks(std::span<const std::span<double>>(blocks));
            s.beta1 = o.at("beta1").get<double>();
            s.beta2 = o.at("beta2").get<double>();
            s.epsilon = o.at("epsilon").get<double>();
            s.step_count = o.at("step_count").get<std::int64_t>();
            for (auto& m : s.first_moment) reader.read_into(m);
            for (auto& v : s.second_moment) reader.read_into(v);
            ckpt.optimizer = std::move(s);
        }
        if (c.header.contains("sampler")) {
            const json& s = c.header["sampler"];
            ckpt.sampler = RngPosition{s.at("seed").get<std::uint64_t>(), s.at("stream_id").get<std::uint64_t>(),
                                       s.at("position").get<std::uint64_t>()};
        }
        if (!reader.exhausted()) throw SchemaError("checkpoint payload has trailing values");
    } catch (const json::exception& e) {
        throw SchemaError("'" + path.string() + "': bad checkpoint header: " + e.what());
    } catch (const InvalidArgument& e) {
        throw SchemaError("'" + path.string() + "': " + e.what());
    }
    return ckpt;
}

} // namespace opicl::deeposets
