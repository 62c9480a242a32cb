#include "opicl/cli/cli.hpp"

#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "opicl/errors.hpp"
#include "opicl/io/csv.hpp"
#include "opicl/pdegen/dataset.hpp"
#include "opicl/trainer/trainer.hpp"
#include "opicl/universality/universality.hpp"

namespace opicl::cli {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out = io::split_csv_line(s);
    for (const auto& item : out) {
        if (item.empty()) throw InvalidArgument("empty entry in list '" + s + "'");
    }
    return out;
}

std::vector<pdegen::ProblemFamily> parse_families(const std::string& s) {
    if (s == "all") return pdegen::ProblemFamily::all();
    std::vector<pdegen::ProblemFamily> out;
    for (const auto& name : split_list(s)) out.push_back(pdegen::ProblemFamily::parse(name));
    return out;
}

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) {
        try {
            out.push_back(io::parse_double(item));
        } catch (const SchemaError&) {
            throw InvalidArgument("not a number: '" + item + "'");
        }
    }
    return out;
}

void require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw IoError("no such file: '" + p.string() + "'");
}

void require_parent(const fs::path& p) {
    const fs::path parent = p.parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) {
        throw IoError("output directory does not exist: '" + parent.string() + "'");
    }
}

struct GenArgs {
    std::string families = "all";
    std::size_t per_family = 100;
    pdegen::GenConfig cfg;
    std::uint64_t seed = 0;
    std::string out;
};

struct TrainArgs {
    std::string data;
    std::string out;
    std::string metrics;
    std::string resume;
    trainer::TrainConfig cfg;
    bool quiet = false;
};

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string out;
};

struct DemoArgs {
    std::string checkpoint;
    std::string data;
    std::size_t index = 0;
    std::string family;
    std::uint64_t seed = 0;
    std::size_t prompt_size = 4;
    std::string out;
};

struct UniArgs {
    std::string families = "scaling,shift,constant,poisson";
    std::string deltas = "0.4,0.2,0.1,0.05";
    std::string amplitudes = "0.5,0.75,1";
    std::size_t phases = 720;
    universality::SweepConfig cfg;
    std::string out;
};

void run_gen(const GenArgs& a, std::ostream& out) {
    require_parent(a.out);
    const auto families = parse_families(a.families);
    if (a.per_family == 0) throw InvalidArgument("--per-family must be positive");
    const pdegen::Dataset ds = pdegen::generate_dataset(a.cfg, families, a.per_family, a.seed);
    pdegen::write_dataset(a.out, ds);
    out << "wrote " << ds.instances.size() << " instances to " << a.out << '\n';
}

void run_train(TrainArgs a, const CLI::App& app, std::ostream& out) {
    require_file(a.data);
    require_parent(a.out);
    fs::path metrics_path = a.metrics.empty() ? fs::path(a.out).replace_extension(".metrics.csv") : fs::path(a.metrics);
    require_parent(metrics_path);
    const pdegen::Dataset ds = pdegen::read_dataset(a.data);
    if (ds.empty()) throw InvalidArgument("empty dataset");

    trainer::TrainHooks hooks;
    hooks.checkpoint_path = a.out;
    if (!a.quiet) {
        hooks.on_log = [&out](const trainer::StepLog& s) {
            out << "iter " << s.iteration << " train_mse " << io::format_double(s.train_mse) << '\n';
        };
    }

    trainer::TrainResult result;
    if (!a.resume.empty()) {
        require_file(a.resume);
        trainer::LoadedCheckpoint loaded = trainer::load_checkpoint(a.resume);
        if (app.count("--iters")) loaded.config.iterations = a.cfg.iterations;
        loaded.config.arch.validate();
        if (loaded.config.arch.grid_n != ds.grid_n) throw InvalidArgument("checkpoint grid does not match the dataset");
        result = trainer::train(loaded.config, ds.instances, std::move(loaded.state), hooks, std::move(loaded.metrics));
    } else {
        a.cfg.arch.grid_n = ds.grid_n;
        result = trainer::train(a.cfg, ds.instances, hooks);
    }
    trainer::write_metrics_csv(metrics_path, result.metrics);
    out << "final train_mse " << io::format_double(*result.metrics.final_train_mse) << '\n';
    out << "checkpoint " << a.out << "\nmetrics " << metrics_path.string() << '\n';
}

void run_eval(const EvalArgs& a, std::ostream& out) {
    require_file(a.checkpoint);
    require_file(a.data);
    if (!a.out.empty()) require_parent(a.out);
    const auto loaded = trainer::load_checkpoint(a.checkpoint);
    const pdegen::Dataset ds = pdegen::read_dataset(a.data);
    if (ds.empty()) throw InvalidArgument("empty dataset");
    const trainer::EvalReport r = trainer::evaluate(loaded.state.params, ds.instances);

    std::ostringstream table;
    table << "family,count,mse\n";
    for (const auto& [name, mse] : r.per_family_mse) {
        table << name << ',' << r.per_family_count.at(name) << ',' << io::format_double(mse) << '\n';
    }
    table << "all," << r.count << ',' << io::format_double(r.mse) << '\n';
    out << table.str();
    if (!a.out.empty()) {
        std::ofstream f(a.out, std::ios::binary);
        if (!(f << table.str())) throw IoError("cannot write '" + a.out + "'");
    }
}

void run_demo(const DemoArgs& a, std::ostream& out) {
    require_file(a.checkpoint);
    require_parent(a.out);
    const auto loaded = trainer::load_checkpoint(a.checkpoint);
    const std::size_t grid_n = loaded.config.arch.grid_n;

    pdegen::OperatorInstance inst;
    if (!a.data.empty()) {
        require_file(a.data);
        const pdegen::Dataset ds = pdegen::read_dataset(a.data);
        if (ds.empty()) throw InvalidArgument("empty dataset");
        if (a.index >= ds.instances.size()) {
            throw InvalidArgument("--index " + std::to_string(a.index) + " is out of range for " +
                                  std::to_string(ds.instances.size()) + " instances");
        }
        inst = ds.instances[a.index];
    } else {
        if (a.family.empty()) throw InvalidArgument("icl-demo needs --data or --family");
        pdegen::GenConfig cfg;
        cfg.grid_n = grid_n;
        cfg.prompt_size = a.prompt_size;
        ndmath::Rng rng(a.seed, 0);
        inst = pdegen::build_operator_instance(pdegen::ProblemFamily::parse(a.family), cfg, rng);
    }
    if (inst.query.parameter.size() != grid_n) throw InvalidArgument("instance grid does not match the checkpoint");

    const pdegen::Grid grid(grid_n);
    const auto pred = deeposets::predict_function(loaded.state.params, inst.prompt, inst.query.parameter.values, grid);
    emit_plot_data(inst, pred.values, inst.query.solution.values, a.out);
    out << inst.family.name() << " relative_l2 "
        << io::format_double(trainer::relative_l2(pred.values, inst.query.solution.values)) << '\n';
    out << "wrote " << a.out << '\n';
}

void run_universality(const UniArgs& a, std::ostream& out) {
    require_parent(a.out);
    const auto deltas = parse_doubles(a.deltas);
    const auto amplitudes = parse_doubles(a.amplitudes);
    const auto cloud = universality::sinusoid_cloud(amplitudes, a.phases);

    std::vector<universality::SweepRow> rows;
    for (const auto& name : split_list(a.families)) {
        universality::OperatorFamily fam;
        if (name == "scaling") {
            fam = universality::scaling_family({1.0, 1.5, 2.0});
        } else if (name == "shift") {
            fam = universality::shift_family({-0.5, 0.0, 0.5});
        } else if (name == "constant") {
            fam = universality::constant_family();
        } else if (name == "poisson") {
            fam = universality::poisson_family(0.3, -0.2);
        } else {
            throw InvalidArgument("unknown operator family '" + name + "'");
        }
        const auto part = universality::universality_error_sweep(fam, cloud, deltas, a.cfg);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    universality::write_sweep_csv(a.out, rows);
    for (const auto& r : rows) {
        out << r.family_id << " delta " << io::format_double(r.delta) << " sup_error " << io::format_double(r.sup_error)
            << " interp_error " << io::format_double(r.interpolation_error) << " prompt " << r.prompt_size
            << " centers " << r.num_centers << " verifier " << (r.verifier.passed ? "pass" : "FAIL") << " ratio "
            << io::format_double(r.verifier.worst_ratio) << " denominator_bound "
            << (r.denominator_bound_holds ? "holds" : "FAILS") << " cover_failures " << r.cover_failures << '\n';
    }
    out << "wrote " << a.out << '\n';
}

} // namespace

void emit_plot_data(const pdegen::OperatorInstance& instance, std::span<const double> prediction,
                    std::span<const double> exact, const fs::path& path) {
    const std::size_t n = instance.query.parameter.size();
    if (prediction.size() != n || exact.size() != n) throw ShapeError("emit_plot_data: length mismatch");
    for (const auto& p : instance.prompt) {
        if (p.parameter.size() != n || p.solution.size() != n) throw ShapeError("emit_plot_data: prompt length mismatch");
    }
    const std::size_t m = instance.prompt.size();
    const pdegen::Grid grid(n);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    const auto& c = instance.coeffs;
    out << "# family=" << pdegen::to_string(instance.family.pde)
        << " direction=" << pdegen::to_string(instance.family.direction) << " a=" << io::format_double(c.a)
        << " c=" << io::format_double(c.c) << " u0=" << io::format_double(c.u0) << " u1=" << io::format_double(c.u1)
        << " m=" << m << '\n';

    std::vector<std::string> header{"x"};
    for (std::size_t i = 1; i <= m; ++i) header.push_back("prompt_param_" + std::to_string(i));
    for (std::size_t i = 1; i <= m; ++i) header.push_back("prompt_sol_" + std::to_string(i));
    header.insert(header.end(), {"query_param", "prediction", "exact"});
    out << io::csv_row(header) << '\n';

    std::vector<std::string> row;
    for (std::size_t k = 0; k < n; ++k) {
        row.clear();
        row.push_back(io::format_double(grid[k]));
        for (const auto& p : instance.prompt) row.push_back(io::format_double(p.parameter.values[k]));
        for (const auto& p : instance.prompt) row.push_back(io::format_double(p.solution.values[k]));
        row.push_back(io::format_double(instance.query.parameter.values[k]));
        row.push_back(io::format_double(prediction[k]));
        row.push_back(io::format_double(exact[k]));
        out << io::csv_row(row) << '\n';
    }
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"In-context operator learning lab: data generation, DeepOSets training and universality checks",
                 "opicl"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file with flag values; flags on the command line take precedence");

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate an operator dataset");
    gen_cmd->add_option("--families", gen.families, "'all' or comma-separated, e.g. poisson-forward,reaction_diffusion-inverse")
        ->capture_default_str();
    gen_cmd->add_option("--per-family", gen.per_family, "Instances per problem family")->capture_default_str();
    gen_cmd->add_option("--prompt-size", gen.cfg.prompt_size, "Example pairs per prompt")->capture_default_str();
    gen_cmd->add_option("--grid-n", gen.cfg.grid_n, "Grid points on [0, 1]")->capture_default_str();
    gen_cmd->add_option("--gp-variance", gen.cfg.gp.variance, "GP kernel variance")->capture_default_str();
    gen_cmd->add_option("--gp-length-scale", gen.cfg.gp.length_scale, "GP kernel length scale")->capture_default_str();
    gen_cmd->add_option("--rd-sign", gen.cfg.reaction_diffusion.sign, "Sign s in s*a*u'' + k*u = c")
        ->capture_default_str();
    gen_cmd->add_option("--rd-max-abs", gen.cfg.reaction_diffusion.max_abs_solution,
                        "Resample reaction-diffusion draws whose solution exceeds this in max norm (0: off)")
        ->capture_default_str();
    gen_cmd->add_option("--max-retries", gen.cfg.max_retries, "Resamples allowed per rejected draw")
        ->capture_default_str();
    gen_cmd->add_option("--parameter-pool", gen.cfg.parameter_pool,
                        "Draw parameter functions from a fixed pool of this size per family (0: fresh draws)")
        ->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "Random seed")->required();
    gen_cmd->add_option("--out", gen.out, "Output dataset file")->required();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train DeepOSets on a dataset");
    train_cmd->add_option("--data", tr.data, "Dataset file")->required();
    train_cmd->add_option("--iters", tr.cfg.iterations, "Total Adam iterations")->capture_default_str();
    train_cmd->add_option("--batch", tr.cfg.batch_size, "Instances per mini-batch")->capture_default_str();
    train_cmd->add_option("--lr", tr.cfg.lr, "Adam learning rate")->capture_default_str();
    train_cmd->add_option("--seed", tr.cfg.seed, "Seed for initialization and batch sampling")->required();
    train_cmd->add_option("--eval-every", tr.cfg.eval_every, "Log the mini-batch loss every N iterations")
        ->capture_default_str();
    train_cmd->add_option("--checkpoint-every", tr.cfg.checkpoint_every, "Checkpoint every N iterations")
        ->capture_default_str();
    train_cmd->add_option("--clip-norm", tr.cfg.clip_norm, "Global gradient-norm clip (0: off)")->capture_default_str();
    train_cmd->add_flag("--rotate-query,!--no-rotate-query", tr.cfg.rotate_query,
                        "Draw which pair of each sampled instance acts as the query");
    train_cmd->add_option("--out", tr.out, "Checkpoint file")->required();
    train_cmd->add_option("--metrics", tr.metrics, "Metrics CSV (default: checkpoint path with .metrics.csv)");
    train_cmd->add_option("--resume", tr.resume, "Continue from this checkpoint; --iters may raise the total");
    train_cmd->add_flag("--quiet", tr.quiet, "Do not print the loss log");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Per-family MSE of a checkpoint on a dataset");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
    eval_cmd->add_option("--data", ev.data, "Dataset file")->required();
    eval_cmd->add_option("--out", ev.out, "Also write the table to this CSV");

    DemoArgs demo;
    auto* demo_cmd = app.add_subcommand("icl-demo", "Predict one instance in context and write plot data");
    demo_cmd->add_option("--checkpoint", demo.checkpoint, "Checkpoint file")->required();
    demo_cmd->add_option("--data", demo.data, "Take the instance from this dataset");
    demo_cmd->add_option("--index", demo.index, "Instance index in --data")->capture_default_str();
    demo_cmd->add_option("--family", demo.family, "Without --data: generate a fresh instance of this family");
    demo_cmd->add_option("--seed", demo.seed, "Seed for the fresh instance")->capture_default_str();
    demo_cmd->add_option("--prompt-size", demo.prompt_size, "Prompt size for the fresh instance")
        ->capture_default_str();
    demo_cmd->add_option("--out", demo.out, "Output CSV")->required();

    UniArgs uni;
    auto* uni_cmd = app.add_subcommand("verify-universality", "Error sweep of the constructive in-context predictor");
    uni_cmd->add_option("--families", uni.families, "Comma-separated: scaling, shift, constant, poisson")
        ->capture_default_str();
    uni_cmd->add_option("--deltas", uni.deltas, "Comma-separated delta values")->capture_default_str();
    uni_cmd->add_option("--amplitudes", uni.amplitudes, "Sinusoid amplitudes of the function cloud")
        ->capture_default_str();
    uni_cmd->add_option("--phases", uni.phases, "Phases per amplitude in the function cloud")->capture_default_str();
    uni_cmd->add_option("--C", uni.cfg.base.C, "Density constant for the discretization check")->capture_default_str();
    uni_cmd->add_option("--x-grid", uni.cfg.base.x_grid_n, "Input grid points")->capture_default_str();
    uni_cmd->add_option("--y-grid", uni.cfg.base.y_grid_n, "Output grid points")->capture_default_str();
    uni_cmd->add_option("--eval-points", uni.cfg.eval_points, "Points where the reconstruction is checked")
        ->capture_default_str();
    uni_cmd->add_option("--max-queries", uni.cfg.max_queries, "Held-out queries per delta")->capture_default_str();
    uni_cmd->add_option("--epsilon", uni.cfg.base.epsilon_target, "Target sup error (0: none)")->capture_default_str();
    uni_cmd->add_option("--out", uni.out, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (gen_cmd->parsed()) run_gen(gen, out);
        else if (train_cmd->parsed()) run_train(tr, *train_cmd, out);
        else if (eval_cmd->parsed()) run_eval(ev, out);
        else if (demo_cmd->parsed()) run_demo(demo, out);
        else if (uni_cmd->parsed()) run_universality(uni, out);
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << '\n';
        return kSchema;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kInvalidData;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kOk;
}

} // namespace opicl::cli
