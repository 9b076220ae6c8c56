#include "unbench/config.hpp"
#include "unbench/errors.hpp"
#include "unbench/harness.hpp"
#include "unbench/text.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace unbench {

ReportFormat report_format_from_string(const std::string &s) {
	if (s == "csv")
		return ReportFormat::csv;
	if (s == "json")
		return ReportFormat::json;
	if (s == "markdown" || s == "md")
		return ReportFormat::markdown;
	throw ConfigError("unknown report format '" + s + "' (expected csv, json or markdown)");
}

void write_text_file(const std::string &path, const std::string &text) {
	std::ofstream out(path, std::ios::binary);
	if (!out)
		throw IoError("cannot open '" + path + "' for writing");
	out << text;
	if (!out)
		throw IoError("failed writing '" + path + "'");
}

std::string read_text_file(const std::string &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in)
		throw IoError("cannot open '" + path + "'");
	std::stringstream ss;
	ss << in.rdbuf();
	return ss.str();
}

std::string report_to_json(const BenchmarkReport &report) {
	nlohmann::ordered_json j;
	j["format"] = "unbench-report";
	j["version"] = 1;
	j["config"] = experiment_config_to_json(report.config);
	auto runs = nlohmann::ordered_json::array();
	for (const auto &r : report.runs)
		runs.push_back({{"seed", r.seed},
		                {"forget_speakers", r.forget_speakers},
		                {"forget_fraction", r.forget_fraction},
		                {"train_size", r.train_size},
		                {"retain_size", r.retain_size},
		                {"forget_size", r.forget_size},
		                {"test_size", r.test_size},
		                {"original_elapsed", r.original_elapsed},
		                {"gold_elapsed", r.gold_elapsed}});
	j["runs"] = std::move(runs);
	auto records = nlohmann::ordered_json::array();
	for (const auto &r : report.records)
		records.push_back(eval_record_to_json(r));
	j["records"] = std::move(records);
	auto best = nlohmann::ordered_json::array();
	for (const auto &r : report.best)
		best.push_back(eval_record_to_json(r));
	j["best"] = std::move(best);
	return j.dump(2) + "\n";
}

BenchmarkReport report_from_json(const std::string &text) {
	nlohmann::json j;
	try {
		j = nlohmann::json::parse(text);
	} catch (const nlohmann::json::exception &e) {
		throw DataError(std::string("report is not valid JSON: ") + e.what());
	}
	BenchmarkReport rep;
	try {
		if (j.at("format").get<std::string>() != "unbench-report")
			throw DataError("not a benchmark report");
		rep.config = experiment_config_from_json(j.at("config"));
		for (const auto &r : j.at("runs")) {
			RunInfo info;
			info.seed = r.at("seed").get<std::uint64_t>();
			info.forget_speakers = r.at("forget_speakers").get<std::vector<SpeakerId>>();
			info.forget_fraction = r.at("forget_fraction").get<double>();
			info.train_size = r.at("train_size").get<std::size_t>();
			info.retain_size = r.at("retain_size").get<std::size_t>();
			info.forget_size = r.at("forget_size").get<std::size_t>();
			info.test_size = r.at("test_size").get<std::size_t>();
			info.original_elapsed = r.at("original_elapsed").get<double>();
			info.gold_elapsed = r.at("gold_elapsed").get<double>();
			rep.runs.push_back(std::move(info));
		}
		for (const auto &r : j.at("records"))
			rep.records.push_back(eval_record_from_json(r));
		for (const auto &r : j.at("best"))
			rep.best.push_back(eval_record_from_json(r));
	} catch (const nlohmann::json::exception &e) {
		throw DataError(std::string("malformed report: ") + e.what());
	}
	return rep;
}

std::string report_to_csv(const BenchmarkReport &report) {
	std::ostringstream out;
	out << "method,lr,seed,failed,f1_test,f1_forget,mia,elapsed,u,e,t,gum,nomus,speedup\n";
	for (const auto &r : report.records) {
		out << r.method << ',' << format_double(r.lr) << ',' << r.seed << ',' << (r.failed ? 1 : 0);
		for (double v : {r.f1_test, r.f1_forget, r.mia, r.elapsed, r.u, r.e, r.t, r.gum, r.nomus, r.speedup}) {
			out << ',';
			if (!r.failed)
				out << format_double(v);
		}
		out << '\n';
	}
	return out.str();
}

namespace {

// ".689"-style three-decimal score.
std::string score(double v) {
	auto s = format_fixed(v, 3);
	if (s.rfind("0.", 0) == 0)
		s.erase(0, 1);
	return s;
}

} // namespace

std::string report_to_markdown(const BenchmarkReport &report) {
	std::ostringstream out;
	bool first = true;
	for (const auto &run : report.runs) {
		if (!first)
			out << '\n';
		first = false;
		out << "### seed " << run.seed << " (forget fraction " << format_fixed(100.0 * run.forget_fraction, 2)
		    << "%)\n\n";
		out << "| Method | F1_T | F1_F | MIA | GUM | Speedup |\n";
		out << "|---|---|---|---|---|---|\n";
		auto row = [&](const EvalRecord &r) {
			out << "| " << r.method;
			if (r.method != "original" && r.method != "gold")
				out << " (lr " << format_double(r.lr) << ")";
			if (r.failed) {
				out << " | failed | failed | failed | failed | failed |\n";
				return;
			}
			out << " | " << score(r.f1_test) << " | " << score(r.f1_forget) << " | " << score(r.mia) << " | "
			    << score(r.gum) << " | " << format_fixed(r.speedup, 2) << "x |\n";
		};
		for (const char *baseline : {"original", "gold"})
			for (const auto &r : report.records)
				if (r.seed == run.seed && r.method == baseline)
					row(r);
		for (const auto &r : report.best)
			if (r.seed == run.seed)
				row(r);
	}
	return out.str();
}

std::vector<std::string> emit_report(const BenchmarkReport &report, ReportFormat format, const std::string &dir) {
	if (report.records.empty())
		throw DataError("cannot emit an empty report");
	std::error_code ec;
	std::filesystem::create_directories(dir, ec);
	if (ec)
		throw IoError("cannot create output directory '" + dir + "': " + ec.message());
	const std::filesystem::path base(dir);
	std::string path;
	switch (format) {
	case ReportFormat::csv:
		path = (base / "report.csv").string();
		write_text_file(path, report_to_csv(report));
		break;
	case ReportFormat::json:
		path = (base / "report.json").string();
		write_text_file(path, report_to_json(report));
		break;
	case ReportFormat::markdown:
		path = (base / "report.md").string();
		write_text_file(path, report_to_markdown(report));
		break;
	}
	return {path};
}

std::string sweep_to_csv(const std::vector<SweepRow> &rows) {
	std::ostringstream out;
	out << "lr,failed,f1_test,f1_forget,mia\n";
	for (const auto &r : rows) {
		out << format_double(r.lr) << ',' << (r.failed ? 1 : 0);
		for (double v : {r.f1_test, r.f1_forget, r.mia}) {
			out << ',';
			if (!r.failed)
				out << format_double(v);
		}
		out << '\n';
	}
	return out.str();
}

std::string ablation_to_csv(const std::vector<AblationRow> &rows) {
	std::ostringstream out;
	out << "epochs,failed,f1_test,f1_test_gold,mia_unlearned,mia_gold,mia_original,gum\n";
	for (const auto &r : rows) {
		out << r.epochs << ',' << (r.failed ? 1 : 0);
		for (double v : {r.f1_test, r.f1_test_gold, r.mia_unlearned, r.mia_gold, r.mia_original, r.gum}) {
			out << ',';
			out << format_double(v);
		}
		out << '\n';
	}
	return out.str();
}

} // namespace unbench
