#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "unbench/config.hpp"
#include "unbench/errors.hpp"
#include "unbench/harness.hpp"
#include "unbench/text.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>

using namespace unbench;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
	ExperimentConfig c;
	c.gen_config.train_speakers = 12;
	c.gen_config.test_speakers = 4;
	c.gen_config.train_samples = 1200;
	c.gen_config.test_samples = 400;
	c.forget_selection.lo = 0.05;
	c.forget_selection.hi = 0.15;
	c.train_recipe.hidden = {16, 16};
	c.train_recipe.epochs = 10;
	c.clock = "work";
	c.seeds = {7};
	return c;
}

const BenchmarkReport &small_report() {
	static const BenchmarkReport r = run_benchmark(small_config());
	return r;
}

fs::path scratch(const std::string &name) {
	auto p = fs::temp_directory_path() / ("unbench_test_harness_" + name);
	fs::remove_all(p);
	fs::create_directories(p);
	return p;
}

std::vector<std::string> lines_of(const std::string &text) {
	std::vector<std::string> out;
	std::istringstream in(text);
	for (std::string line; std::getline(in, line);)
		out.push_back(line);
	return out;
}

int run_cli(const std::string &args) {
	std::string cmd = std::string(UNBENCH_CLI) + " " + args + " >/dev/null 2>&1";
	int status = std::system(cmd.c_str());
	return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

EvalRecord row(const std::string &method, double lr, double gum, bool failed = false) {
	EvalRecord r;
	r.method = method;
	r.lr = lr;
	r.gum = gum;
	r.failed = failed;
	return r;
}

} // namespace

TEST_CASE("learning-rate families and the default grid") {
	CHECK(gentle_lrs() == std::vector<double>{5e-7, 1e-6, 5e-6});
	CHECK(aggressive_lrs() == std::vector<double>{1e-5, 5e-5, 1e-4});
	for (Method m : {Method::ng, Method::ng_plus, Method::bt, Method::bt_light, Method::scrub})
		CHECK(default_lrs(m) == gentle_lrs());
	for (Method m : {Method::ft, Method::cf_k, Method::unsir})
		CHECK(default_lrs(m) == aggressive_lrs());
	auto grid = default_method_grid();
	CHECK(grid.size() == 24);
	std::size_t i = 0;
	for (Method m : unlearning_methods())
		for (double lr : default_lrs(m)) {
			CHECK(grid[i].method == m);
			CHECK(grid[i].lr == lr);
			++i;
		}
}

TEST_CASE("baseline-only grid yields zero-GUM, unit-speedup rows") {
	auto c = small_config();
	MethodConfig only;
	only.method = Method::original;
	c.method_grid = {only};
	auto rep = run_benchmark(c);
	REQUIRE(rep.records.size() == 2);
	for (const auto &r : rep.records) {
		CHECK(r.gum == 0.0);
		CHECK(r.speedup == 1.0);
	}
	CHECK(rep.best.empty());
	CHECK(rep.records[0].method == "original");
	CHECK(rep.records[1].method == "gold");
}

TEST_CASE("report layout: baselines first, one row per grid cell, sane derived values") {
	const auto &rep = small_report();
	REQUIRE(rep.records.size() == 2 + 24);
	CHECK(rep.records[0].method == "original");
	CHECK(rep.records[1].method == "gold");
	CHECK(rep.records[1].speedup == 1.0);
	auto grid = default_method_grid();
	for (std::size_t i = 0; i < grid.size(); ++i) {
		const auto &r = rep.records[i + 2];
		CHECK(r.method == method_id(grid[i].method));
		CHECK(r.lr == grid[i].lr);
		if (r.failed)
			continue;
		CHECK(r.elapsed > 0.0);
		CHECK(r.speedup > 0.0);
		for (double v : {r.f1_test, r.f1_forget, r.mia, r.u, r.e, r.t, r.gum, r.nomus}) {
			CHECK(v >= 0.0);
			CHECK(v <= 1.0);
		}
	}
	REQUIRE(rep.runs.size() == 1);
	CHECK(rep.runs[0].retain_size + rep.runs[0].forget_size == rep.runs[0].train_size);
	CHECK(rep.runs[0].forget_fraction >= 0.05);
	CHECK(rep.runs[0].forget_fraction <= 0.15);
}

TEST_CASE("best rows are reproducible from the raw rows") {
	const auto &rep = small_report();
	CHECK(rep.best == select_best(rep.records));
	CHECK(rep.best.size() == 8);
	for (const auto &b : rep.best) {
		for (const auto &r : rep.records) {
			if (r.method != b.method || r.failed)
				continue;
			CHECK(r.gum <= b.gum);
			if (r.gum == b.gum)
				CHECK(r.lr >= b.lr);
		}
	}
}

TEST_CASE("select_best: ties go to the smaller lr, failures never win") {
	std::vector<EvalRecord> rows{row("original", 0, 0), row("ng", 5e-6, 0.4), row("ng", 5e-7, 0.4),
	                             row("ng", 1e-6, 0.9, true), row("ft", 1e-5, 0.1, true), row("ft", 5e-5, 0.1, true)};
	auto best = select_best(rows);
	REQUIRE(best.size() == 2);
	CHECK(best[0].method == "ng");
	CHECK(best[0].lr == 5e-7);
	CHECK_FALSE(best[0].failed);
	CHECK(best[1].method == "ft");
	CHECK(best[1].failed);
}

TEST_CASE("determinism and grid isolation under the work clock") {
	auto c = small_config();
	auto a = report_to_json(small_report());
	CHECK(report_to_json(run_benchmark(c)) == a);
	c.workers = 3;
	auto parallel = run_benchmark(c);
	parallel.config.workers = 1; // the config snapshot is the only permitted difference
	CHECK(report_to_json(parallel) == a);
}

TEST_CASE("a diverging grid cell becomes a failed row") {
	auto c = small_config();
	MethodConfig wild;
	wild.method = Method::ng;
	wild.lr = 1e300;
	MethodConfig tame;
	tame.method = Method::ng;
	tame.lr = 5e-7;
	c.method_grid = {wild, tame};
	auto rep = run_benchmark(c);
	REQUIRE(rep.records.size() == 4);
	CHECK(rep.records[2].failed);
	CHECK_FALSE(rep.records[2].failure.empty());
	CHECK_FALSE(rep.records[3].failed);
	REQUIRE(rep.best.size() == 1);
	CHECK(rep.best[0].lr == 5e-7);
	CHECK(lines_of(report_to_markdown(rep)).size() == 4 + 3);
}

TEST_CASE("baseline divergence and infeasible selection abort the run") {
	auto c = small_config();
	c.train_recipe.lr = 1e300;
	CHECK_THROWS_AS(run_benchmark(c), TrainingDivergedError);
	c = small_config();
	c.forget_selection.min_samples = 100000;
	CHECK_THROWS_AS(run_benchmark(c), InfeasibleForgetRequest);
	c = small_config();
	c.method_grid.clear();
	CHECK_THROWS_AS(run_benchmark(c), ConfigError);
}

TEST_CASE("json: parse and re-emit is byte-identical") {
	auto text = report_to_json(small_report());
	auto back = report_from_json(text);
	CHECK(report_to_json(back) == text);
	CHECK(back.records == small_report().records);
	CHECK(back.best == small_report().best);
	CHECK_THROWS_AS(report_from_json("{}"), DataError);
}

TEST_CASE("markdown: two baselines plus one row per method") {
	auto md = lines_of(report_to_markdown(small_report()));
	std::size_t data_rows = 0;
	for (const auto &l : md)
		if (l.rfind("| ", 0) == 0 && l.rfind("| Method", 0) != 0)
			++data_rows;
	CHECK(data_rows == 8 + 2);
	bool original_before_gold = false;
	for (std::size_t i = 0; i + 1 < md.size(); ++i)
		if (md[i].rfind("| original", 0) == 0 && md[i + 1].rfind("| gold", 0) == 0)
			original_before_gold = true;
	CHECK(original_before_gold);
}

TEST_CASE("csv: every non-failed row parses back to finite numbers") {
	auto rows = lines_of(report_to_csv(small_report()));
	REQUIRE(rows.size() == 1 + 26);
	CHECK(rows[0] == "method,lr,seed,failed,f1_test,f1_forget,mia,elapsed,u,e,t,gum,nomus,speedup");
	for (std::size_t i = 1; i < rows.size(); ++i) {
		auto f = split_fields(rows[i], ',');
		REQUIRE(f.size() == 14);
		if (f[3] == "1")
			continue;
		for (std::size_t j = 4; j < f.size(); ++j)
			CHECK(std::isfinite(parse_double(f[j])));
	}
}

TEST_CASE("emit_report writes each format and reports unwritable paths") {
	auto dir = scratch("emit");
	for (auto f : {ReportFormat::csv, ReportFormat::json, ReportFormat::markdown})
		CHECK(emit_report(small_report(), f, dir.string()).size() == 1);
	CHECK(fs::exists(dir / "report.csv"));
	CHECK(fs::exists(dir / "report.json"));
	CHECK(fs::exists(dir / "report.md"));
	CHECK(read_text_file((dir / "report.json").string()) == report_to_json(small_report()));

	write_text_file((dir / "blocker").string(), "x");
	CHECK_THROWS_AS(emit_report(small_report(), ReportFormat::csv, (dir / "blocker" / "sub").string()), IoError);
	CHECK_THROWS_AS(report_format_from_string("xml"), ConfigError);
	fs::remove_all(dir);
}

TEST_CASE("sweep_lr: single value, ordering, csv") {
	auto c = small_config();
	auto one = sweep_lr(c, Method::ng, {5e-7});
	REQUIRE(one.size() == 1);
	CHECK(one[0].lr == 5e-7);
	CHECK_FALSE(one[0].failed);
	CHECK_THROWS_AS(sweep_lr(c, Method::ng, {5e-6, 5e-7}), ConfigError);
	CHECK_THROWS_AS(sweep_lr(c, Method::ng, {}), ConfigError);
	auto rows = sweep_lr(c, Method::ng, {5e-7, 5e-6, 1e300});
	CHECK(rows[2].failed);
	auto csv = lines_of(sweep_to_csv(rows));
	CHECK(csv.size() == 4);
	CHECK(csv[0] == "lr,failed,f1_test,f1_forget,mia");
}

TEST_CASE("epoch_ablation: single budget gives one well-formed row") {
	auto c = small_config();
	MethodConfig m;
	m.method = Method::ng_plus;
	m.lr = 5e-7;
	auto rows = epoch_ablation(c, {1}, m);
	REQUIRE(rows.size() == 1);
	CHECK(rows[0].epochs == 1);
	for (double v : {rows[0].f1_test, rows[0].f1_test_gold, rows[0].mia_unlearned, rows[0].mia_gold,
	                 rows[0].mia_original, rows[0].gum}) {
		CHECK(v >= 0.0);
		CHECK(v <= 1.0);
	}
	auto csv = lines_of(ablation_to_csv(rows));
	REQUIRE(csv.size() == 2);
	CHECK(split_fields(csv[1], ',').size() == split_fields(csv[0], ',').size());
	CHECK_THROWS_AS(epoch_ablation(c, {60, 5}, m), ConfigError);
}

TEST_CASE("config: keys mirror field names, unknown keys are rejected") {
	auto c = small_config();
	auto j = experiment_config_to_json(c);
	CHECK(j.contains("gen_config"));
	CHECK(j.contains("method_grid"));
	CHECK(j.contains("seeds"));
	CHECK(j.contains("output_dir"));
	CHECK(j.contains("report_formats"));
	auto back = experiment_config_from_json(j);
	CHECK(experiment_config_to_json(back).dump() == j.dump());

	auto partial = experiment_config_from_json(nlohmann::json::parse(R"({"seeds":[1,2]})"));
	CHECK(partial.seeds == std::vector<std::uint64_t>{1, 2});
	CHECK(partial.method_grid.size() == 24);
	CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json::parse(R"({"sedes":[1]})")), ConfigError);
	CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json::parse(R"({"gen_config":{"dd":3}})")), ConfigError);
}

TEST_CASE("cli: exit codes") {
	auto dir = scratch("cli");
	auto cfg_path = dir / "small.json";
	write_text_file(cfg_path.string(), experiment_config_to_json(small_config()).dump());
	auto cfg = " --config " + cfg_path.string();

	CHECK(run_cli(cfg + " --out " + (dir / "gen").string() + " generate") == 0);
	CHECK(fs::exists(dir / "gen" / "dataset.csv"));
	CHECK(fs::exists(dir / "gen" / "dataset.meta.json"));

	CHECK(run_cli(cfg + " --out " + (dir / "bench").string() + " --format json,markdown bench") == 0);
	CHECK(fs::exists(dir / "bench" / "report.json"));
	CHECK(fs::exists(dir / "bench" / "report.md"));
	CHECK_FALSE(fs::exists(dir / "bench" / "report.csv"));
	CHECK(run_cli("report --format csv --in " + (dir / "bench" / "report.json").string()) == 0);
	CHECK(fs::exists(dir / "bench" / "report.csv"));

	auto bad = dir / "bad.json";
	write_text_file(bad.string(), R"({"no_such_key": 1})");
	CHECK(run_cli("--config " + bad.string() + " bench") == 1);

	auto diverge = dir / "diverge.json";
	auto dj = experiment_config_to_json(small_config());
	dj["train_recipe"]["lr"] = 1e300;
	write_text_file(diverge.string(), dj.dump());
	CHECK(run_cli("--config " + diverge.string() + " --out " + (dir / "d").string() + " bench") == 2);

	write_text_file((dir / "blocker").string(), "x");
	CHECK(run_cli(cfg + " --out " + (dir / "blocker" / "sub").string() + " generate") == 3);
	CHECK(run_cli("report --in " + (dir / "missing.json").string()) == 3);
	fs::remove_all(dir);
}
