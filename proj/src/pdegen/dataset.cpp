#include "opicl/pdegen/dataset.hpp"

#include <string>

#include "opicl/errors.hpp"
#include "opicl/io/container.hpp"

namespace opicl::pdegen {

namespace {

using nlohmann::json;

json generation_to_json(const GenerationInfo& g) {
    json families = json::array();
    for (const auto& f : g.families) families.push_back(f.name());
    const GenConfig& c = g.config;
    return {{"seed", g.seed},
            {"per_family", g.per_family},
            {"families", families},
            {"prompt_size", c.prompt_size},
            {"gp", {{"variance", c.gp.variance}, {"length_scale", c.gp.length_scale}, {"jitter", c.gp.jitter}}},
            {"reaction_diffusion_sign", c.reaction_diffusion.sign},
            {"max_abs_solution", c.reaction_diffusion.max_abs_solution},
            {"max_retries", c.max_retries},
            {"parameter_pool", c.parameter_pool}};
}

GenerationInfo generation_from_json(const json& j, std::size_t grid_n) {
    GenerationInfo g;
    g.seed = j.at("seed").get<std::uint64_t>();
    g.per_family = j.at("per_family").get<std::size_t>();
    for (const auto& f : j.at("families")) g.families.push_back(ProblemFamily::parse(f.get<std::string>()));
    g.config.grid_n = grid_n;
    g.config.prompt_size = j.at("prompt_size").get<std::size_t>();
    g.config.gp.variance = j.at("gp").at("variance").get<double>();
    g.config.gp.length_scale = j.at("gp").at("length_scale").get<double>();
    g.config.gp.jitter = j.at("gp").at("jitter").get<double>();
    g.config.reaction_diffusion.sign = j.at("reaction_diffusion_sign").get<double>();
    g.config.reaction_diffusion.max_abs_solution = j.at("max_abs_solution").get<double>();
    g.config.max_retries = j.at("max_retries").get<std::size_t>();
    g.config.parameter_pool = j.at("parameter_pool").get<std::size_t>();
    return g;
}

void append(std::vector<double>& out, const GridFunction& f, std::size_t n) {
    if (f.size() != n) throw ShapeError("write_dataset: function length " + std::to_string(f.size()) + " != grid_n");
    out.insert(out.end(), f.values.begin(), f.values.end());
}

} // namespace

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    const std::size_t n = dataset.grid_n;
    json entries = json::array();
    std::vector<double> payload;
    for (const auto& inst : dataset.instances) {
        entries.push_back({{"family", std::string(to_string(inst.family.pde))},
                           {"direction", std::string(to_string(inst.family.direction))},
                           {"m", inst.prompt.size()}});
        payload.insert(payload.end(), {inst.coeffs.a, inst.coeffs.c, inst.coeffs.u0, inst.coeffs.u1});
        for (const auto& p : inst.prompt) {
            append(payload, p.parameter, n);
            append(payload, p.solution, n);
        }
        append(payload, inst.query.parameter, n);
        append(payload, inst.query.solution, n);
    }
    json header = {{"kind", "dataset"},
                   {"schema_version", kDatasetSchemaVersion},
                   {"grid_n", n},
                   {"count", dataset.instances.size()},
                   {"instances", entries}};
    if (dataset.generation) header["generation"] = generation_to_json(*dataset.generation);
    io::write_container(path, std::move(header), payload);
}

Dataset read_dataset(const std::filesystem::path& path) {
    const io::Container c = io::read_container(path);
    io::expect_kind(c.header, "dataset", kDatasetSchemaVersion);
    Dataset ds;
    try {
        ds.grid_n = c.header.at("grid_n").get<std::size_t>();
        const std::size_t count = c.header.at("count").get<std::size_t>();
        const json& entries = c.header.at("instances");
        if (!entries.is_array() || entries.size() != count) throw SchemaError("instance table does not match count");
        if (c.header.contains("generation")) ds.generation = generation_from_json(c.header["generation"], ds.grid_n);

        io::PayloadReader reader(c.payload);
        const std::size_t n = ds.grid_n;
        auto read_fn = [&] {
            const auto v = reader.take(n);
            return GridFunction{{v.begin(), v.end()}};
        };
        ds.instances.reserve(count);
        for (const auto& e : entries) {
            OperatorInstance inst;
            inst.family = {parse_pde(e.at("family").get<std::string>()),
                           parse_direction(e.at("direction").get<std::string>())};
            inst.coeffs.a = reader.next();
            inst.coeffs.c = reader.next();
            inst.coeffs.u0 = reader.next();
            inst.coeffs.u1 = reader.next();
            const std::size_t m = e.at("m").get<std::size_t>();
            for (std::size_t i = 0; i < m; ++i) {
                FunctionPair p;
                p.parameter = read_fn();
                p.solution = read_fn();
                inst.prompt.push_back(std::move(p));
            }
            inst.query.parameter = read_fn();
            inst.query.solution = read_fn();
            ds.instances.push_back(std::move(inst));
        }
        if (!reader.exhausted()) throw SchemaError("payload has trailing values");
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("'" + path.string() + "': bad dataset header: " + e.what());
    } catch (const InvalidArgument& e) {
        throw SchemaError("'" + path.string() + "': " + e.what());
    }
    return ds;
}

Dataset dataset_roundtrip(const Dataset& dataset, const std::filesystem::path& path) {
    write_dataset(path, dataset);
    return read_dataset(path);
}

} // namespace opicl::pdegen
