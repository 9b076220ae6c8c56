// unbench: command-line front end for the unlearning benchmark.
//
//   unbench generate      --out DIR               synthetic dataset to DIR/dataset.{csv,meta.json}
//   unbench bench         --out DIR               full benchmark, reports to DIR
//   unbench sweep-lr      --method ng --lrs ...   learning-rate sweep to DIR/sweep_<method>.csv
//   unbench ablate-epochs --epochs 5,60 ...       epoch ablation to DIR/ablation_<method>.csv
//   unbench report        --in DIR/report.json    re-render a saved report
//
// Exit codes: 0 success, 1 config/data error, 2 baseline training failure, 3 io error.

#include "unbench/config.hpp"
#include "unbench/errors.hpp"
#include "unbench/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

using namespace unbench;

struct GlobalOptions {
	std::string config_path;
	std::optional<std::uint64_t> seed;
	std::optional<std::string> out;
	std::optional<std::size_t> workers;
	std::vector<std::string> formats;
	std::optional<std::string> clock;
};

ExperimentConfig resolve(const GlobalOptions &g) {
	ExperimentConfig c = g.config_path.empty() ? ExperimentConfig{} : load_experiment_config(g.config_path);
	if (g.seed)
		c.seeds = {*g.seed};
	if (g.out)
		c.output_dir = *g.out;
	if (g.workers)
		c.workers = *g.workers;
	if (!g.formats.empty())
		c.report_formats = g.formats;
	if (g.clock)
		c.clock = *g.clock;
	c.validate();
	return c;
}

void write_in(const std::string &dir, const std::string &name, const std::string &text) {
	std::error_code ec;
	std::filesystem::create_directories(dir, ec);
	if (ec)
		throw IoError("cannot create output directory '" + dir + "': " + ec.message());
	auto path = (std::filesystem::path(dir) / name).string();
	write_text_file(path, text);
	std::cout << "wrote " << path << '\n';
}

void emit_all(const BenchmarkReport &report, const ExperimentConfig &c) {
	for (const auto &f : c.report_formats)
		for (const auto &path : emit_report(report, report_format_from_string(f), c.output_dir))
			std::cout << "wrote " << path << '\n';
}

int exit_code(const Error &e) {
	switch (e.kind()) {
	case ErrorKind::io:
		return 3;
	case ErrorKind::diverged:
		return 2;
	default:
		return 1;
	}
}

} // namespace

int main(int argc, char **argv) {
	CLI::App app{"Machine-unlearning benchmark on synthetic speaker-clustered intent data"};
	app.require_subcommand(1);

	GlobalOptions g;
	std::uint64_t seed = 0;
	std::string out;
	std::size_t workers = 1;
	std::string clock;
	app.add_option("--config", g.config_path, "JSON experiment config")->check(CLI::ExistingFile);
	auto *seed_opt = app.add_option("--seed", seed, "run a single seed");
	auto *out_opt = app.add_option("--out", out, "output directory");
	auto *workers_opt = app.add_option("--workers", workers, "parallel grid cells")->check(CLI::PositiveNumber);
	app.add_option("--format", g.formats, "report formats: csv, json, markdown")
	    ->check(CLI::IsMember({"csv", "json", "markdown"}))
	    ->delimiter(',');
	auto *clock_opt = app.add_option("--clock", clock, "steady (wall clock) or work (deterministic)")
	                      ->check(CLI::IsMember({"steady", "work"}));

	auto *gen = app.add_subcommand("generate", "write the synthetic dataset");
	auto *bench = app.add_subcommand("bench", "run the full benchmark");

	auto *sweep = app.add_subcommand("sweep-lr", "learning-rate sweep for one method");
	std::string sweep_method = "ng";
	std::vector<double> sweep_lrs{5e-7, 5e-6, 5e-5, 5e-4};
	sweep->add_option("--method", sweep_method, "method id");
	sweep->add_option("--lrs", sweep_lrs, "ascending nominal learning rates")->delimiter(',');

	auto *ablate = app.add_subcommand("ablate-epochs", "retrain at several epoch budgets and unlearn");
	std::vector<int> ablate_epochs{5, 7, 11, 15, 60};
	std::string ablate_method = "ng_plus";
	double ablate_lr = 5e-7;
	ablate->add_option("--epochs", ablate_epochs, "ascending epoch budgets")->delimiter(',');
	ablate->add_option("--method", ablate_method, "method id");
	ablate->add_option("--lr", ablate_lr, "nominal learning rate");

	auto *report = app.add_subcommand("report", "re-render a saved JSON report");
	std::string report_in;
	report->add_option("--in", report_in, "report.json to read")->required();

	for (auto *sub : {gen, bench, sweep, ablate, report})
		sub->fallthrough();

	CLI11_PARSE(app, argc, argv);
	if (*seed_opt)
		g.seed = seed;
	if (*out_opt)
		g.out = out;
	if (*workers_opt)
		g.workers = workers;
	if (*clock_opt)
		g.clock = clock;

	try {
		if (*report) {
			auto rep = report_from_json(read_text_file(report_in));
			ExperimentConfig c = rep.config;
			c.output_dir = g.out.value_or(std::filesystem::path(report_in).parent_path().string());
			if (c.output_dir.empty())
				c.output_dir = ".";
			if (!g.formats.empty())
				c.report_formats = g.formats;
			emit_all(rep, c);
			return 0;
		}

		ExperimentConfig c = resolve(g);
		if (*gen) {
			GenConfig gc = c.gen_config;
			gc.seed = c.seeds.front();
			auto bundle = generate(gc);
			std::filesystem::create_directories(c.output_dir);
			auto stem = (std::filesystem::path(c.output_dir) / "dataset").string();
			export_dataset(bundle, stem);
			std::cout << "wrote " << stem << ".csv and " << stem << ".meta.json (" << bundle.train.size()
			          << " train, " << bundle.test.size() << " test)\n";
		} else if (*bench) {
			auto rep = run_benchmark(c);
			emit_all(rep, c);
			std::cout << report_to_markdown(rep);
		} else if (*sweep) {
			auto rows = sweep_lr(c, method_from_id(sweep_method), sweep_lrs);
			auto text = sweep_to_csv(rows);
			write_in(c.output_dir, "sweep_" + sweep_method + ".csv", text);
			std::cout << text;
		} else if (*ablate) {
			MethodConfig m;
			for (const auto &cell : c.method_grid)
				if (method_id(cell.method) == ablate_method) {
					m = cell;
					break;
				}
			m.method = method_from_id(ablate_method);
			m.lr = ablate_lr;
			auto rows = epoch_ablation(c, ablate_epochs, m);
			auto text = ablation_to_csv(rows);
			write_in(c.output_dir, "ablation_" + ablate_method + ".csv", text);
			std::cout << text;
		}
	} catch (const Error &e) {
		std::cerr << "error: " << e.what() << '\n';
		return exit_code(e);
	} catch (const std::filesystem::filesystem_error &e) {
		std::cerr << "error: " << e.what() << '\n';
		return 3;
	}
	return 0;
}
