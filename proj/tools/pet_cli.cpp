// Command-line front end. Talks to the library through the C API only.

#include <pet/pet.h>

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

struct Failure {
    std::string message;
};

void check(pet_status s, const char* what) {
    if (s != PET_OK) {
        throw Failure{std::string(what) + " failed (" + pet_status_name(s) + "): " + pet_last_error()};
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

// "zdt1" or "zdt1:30" or "lsmop1:100:3"
json problem_list(const std::string& spec, std::size_t d, std::size_t m) {
    json out = json::array();
    for (const auto& item : split(spec, ',')) {
        const auto parts = split(item, ':');
        json p{{"name", parts.at(0)}, {"d", d}, {"m", m}};
        if (parts.size() > 1) p["d"] = std::stoul(parts[1]);
        if (parts.size() > 2) p["m"] = std::stoul(parts[2]);
        out.push_back(p);
    }
    return out;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Failure{"cannot read '" + path + "'"};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Rows of numbers separated by whitespace or commas; '#' starts a comment.
std::vector<std::vector<double>> read_points(const std::string& path) {
    std::istringstream in(read_text(path));
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        line = line.substr(0, line.find('#'));
        for (char& c : line)
            if (c == ',') c = ' ';
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v) row.push_back(v);
        if (!ls.eof()) throw Failure{"non-numeric entry in '" + path + "'"};
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (!rows.empty() && rows.front().size() == 0) throw Failure{"empty rows in '" + path + "'"};
    for (const auto& r : rows)
        if (r.size() != rows.front().size()) throw Failure{"ragged rows in '" + path + "'"};
    return rows;
}

std::vector<double> flatten(const std::vector<std::vector<double>>& rows) {
    std::vector<double> out;
    for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pre-evolved transformer toolkit for multi-objective evolutionary optimization"};
    app.require_subcommand(1);

    // collect
    auto* collect = app.add_subcommand("collect", "Record teacher trajectories into a .jsonl dataset");
    std::string c_problems, c_teachers = "nsga2", c_out;
    std::size_t c_seeds = 1, c_pop = 100, c_evals = 10000, c_d = 30, c_m = 2, c_workers = 1;
    std::uint64_t c_master = 0;
    collect->add_option("--problems", c_problems, "e.g. zdt1,zdt2:30,lsmop1:100:3")->required();
    collect->add_option("--teachers", c_teachers, "nsga2,cso");
    collect->add_option("--seeds", c_seeds, "Runs per (problem, teacher)");
    collect->add_option("--pop", c_pop, "Population size");
    collect->add_option("--evals", c_evals, "Evaluations per run");
    collect->add_option("--d", c_d, "Default decision dimension");
    collect->add_option("--m", c_m, "Default objective count");
    collect->add_option("--master-seed", c_master);
    collect->add_option("--workers", c_workers);
    collect->add_option("--out", c_out, "Dataset path")->required();

    // pretrain
    auto* pretrain = app.add_subcommand("pretrain", "Train a model on a trajectory dataset");
    std::string p_data, p_config, p_out, p_init;
    std::size_t p_steps = 200, p_batch = 8, p_every = 10;
    double p_lr = 1e-3;
    std::uint64_t p_seed = 0;
    pretrain->add_option("--data", p_data, "Dataset (.jsonl)")->required();
    pretrain->add_option("--config", p_config, "Model config JSON file");
    pretrain->add_option("--init", p_init, "Start from this checkpoint instead of a fresh model");
    pretrain->add_option("--steps", p_steps);
    pretrain->add_option("--batch", p_batch);
    pretrain->add_option("--lr", p_lr);
    pretrain->add_option("--seed", p_seed);
    pretrain->add_option("--eval-every", p_every);
    pretrain->add_option("--out", p_out, "Checkpoint path (.petm)")->required();

    // optimize
    auto* optimize = app.add_subcommand("optimize", "Run NSGA-II with the model on one problem");
    std::string o_problem, o_model, o_log;
    std::size_t o_d = 30, o_m = 2, o_pop = 100, o_evals = 1000, o_fine_steps = 1;
    double o_fine_lr = 1e-4;
    bool o_frozen = false;
    std::uint64_t o_seed = 0;
    optimize->add_option("--problem", o_problem)->required();
    optimize->add_option("--d", o_d);
    optimize->add_option("--m", o_m);
    optimize->add_option("--model", o_model, "Checkpoint (.petm)")->required();
    optimize->add_option("--pop", o_pop);
    optimize->add_option("--evals", o_evals);
    optimize->add_option("--seed", o_seed);
    optimize->add_option("--fine-steps", o_fine_steps, "Fine-evolve steps per generation");
    optimize->add_option("--fine-lr", o_fine_lr);
    optimize->add_flag("--frozen", o_frozen, "Disable fine-evolving");
    optimize->add_option("--log", o_log, "Per-generation JSON lines");

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "Run an experiment config and write reports");
    std::string b_config, b_out;
    bench->add_option("--config", b_config, "Experiment JSON")->required();
    bench->add_option("--out", b_out, "Report directory")->required();

    // igd
    auto* igd = app.add_subcommand("igd", "IGD of a solution set against a reference front");
    std::string i_front, i_solutions;
    igd->add_option("--front", i_front)->required();
    igd->add_option("--solutions", i_solutions)->required();

    app.add_subcommand("selftest", "Run the built-in oracle suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    try {
        if (*collect) {
            json cfg{{"problems", problem_list(c_problems, c_d, c_m)},
                     {"teachers", split(c_teachers, ',')},
                     {"seeds", c_seeds},
                     {"population", c_pop},
                     {"evaluations", c_evals},
                     {"master_seed", c_master},
                     {"workers", c_workers}};
            std::size_t pairs = 0;
            check(pet_collect(cfg.dump().c_str(), c_out.c_str(), &pairs), "collect");
            std::printf("wrote %zu pairs to %s\n", pairs, c_out.c_str());
        } else if (*pretrain) {
            pet_model* model = nullptr;
            if (!p_init.empty()) {
                check(pet_model_load(p_init.c_str(), &model), "load");
            } else {
                const std::string cfg = p_config.empty() ? std::string() : read_text(p_config);
                check(pet_model_create(p_config.empty() ? nullptr : cfg.c_str(), p_seed, &model),
                      "model");
            }
            json tcfg{{"steps", p_steps}, {"batch_size", p_batch}, {"lr", p_lr},
                      {"seed", p_seed},   {"eval_every", p_every}};
            auto report = [](size_t step, double loss, void*) {
                std::printf("step %zu loss %.6e\n", step, loss);
                std::fflush(stdout);
            };
            const pet_status s = pet_pretrain(model, p_data.c_str(), tcfg.dump().c_str(), report, nullptr);
            if (s == PET_OK) check(pet_model_save(model, p_out.c_str()), "save");
            pet_model_destroy(model);
            check(s, "pretrain");
            std::printf("saved %s\n", p_out.c_str());
        } else if (*optimize) {
            pet_problem* problem = nullptr;
            pet_model* model = nullptr;
            check(pet_problem_create(o_problem.c_str(), o_d, o_m, &problem), "problem");
            const pet_status ls = pet_model_load(o_model.c_str(), &model);
            if (ls != PET_OK) pet_problem_destroy(problem);
            check(ls, "load");
            json opts{{"population", o_pop},
                      {"evaluations", o_evals},
                      {"fine_evolve",
                       {{"enabled", !o_frozen}, {"steps_per_generation", o_fine_steps}, {"lr", o_fine_lr}}}};
            double value = 0.0;
            std::size_t used = 0;
            const pet_status s = pet_optimize(model, problem, opts.dump().c_str(), o_seed,
                                              o_log.empty() ? nullptr : o_log.c_str(), &value, &used);
            pet_model_destroy(model);
            pet_problem_destroy(problem);
            check(s, "optimize");
            if (std::isnan(value)) std::printf("evaluations %zu igd NaN\n", used);
            else std::printf("evaluations %zu igd %.17g\n", used, value);
        } else if (*bench) {
            check(pet_benchmark(read_text(b_config).c_str(), b_out.c_str(), nullptr), "benchmark");
            std::cout << read_text(b_out + "/table.txt");
        } else if (*igd) {
            const auto front = read_points(i_front);
            const auto sols = read_points(i_solutions);
            if (front.empty() || sols.empty()) throw Failure{"empty point file"};
            if (front.front().size() != sols.front().size())
                throw Failure{"front and solutions differ in objective count"};
            const auto f = flatten(front);
            const auto s = flatten(sols);
            double value = 0.0;
            check(pet_igd(f.data(), front.size(), s.data(), sols.size(), front.front().size(), &value),
                  "igd");
            std::printf("%.17g\n", value);
        } else {
            int ok = 0;
            auto show = [](const char* name, int passed, const char* detail, void*) {
                std::printf("%-24s %s  %s\n", name, passed ? "PASS" : "FAIL", detail);
            };
            check(pet_selftest(show, nullptr, &ok), "selftest");
            return ok ? 0 : kRuntime;
        }
    } catch (const Failure& f) {
        std::fprintf(stderr, "error: %s\n", f.message.c_str());
        return kRuntime;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntime;
    }
    return 0;
}
