#include "unbench/config.hpp"

#include "unbench/errors.hpp"
#include "unbench/text.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace unbench {

std::string format_double(double v) {
	if (std::isnan(v))
		return "nan";
	if (std::isinf(v))
		return v > 0 ? "inf" : "-inf";
	char buf[64];
	auto res = std::to_chars(buf, buf + sizeof buf, v);
	return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int digits) {
	char buf[64];
	auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
	return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
	double v = 0.0;
	auto res = std::from_chars(s.data(), s.data() + s.size(), v);
	if (res.ec != std::errc() || res.ptr != s.data() + s.size())
		throw DataError("cannot parse '" + std::string(s) + "' as a number");
	return v;
}

std::int64_t parse_int(std::string_view s) {
	std::int64_t v = 0;
	auto res = std::from_chars(s.data(), s.data() + s.size(), v);
	if (res.ec != std::errc() || res.ptr != s.data() + s.size())
		throw DataError("cannot parse '" + std::string(s) + "' as an integer");
	return v;
}

std::vector<std::string> split_fields(std::string_view line, char sep) {
	std::vector<std::string> out;
	std::size_t start = 0;
	while (true) {
		auto pos = line.find(sep, start);
		out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
		if (pos == std::string_view::npos)
			break;
		start = pos + 1;
	}
	if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
		out.back().pop_back();
	return out;
}

namespace {

void check_keys(const nlohmann::json &j, const char *what, std::initializer_list<const char *> allowed) {
	if (!j.is_object())
		throw ConfigError(std::string(what) + " must be an object");
	for (const auto &item : j.items()) {
		bool ok = false;
		for (const char *a : allowed)
			ok = ok || item.key() == a;
		if (!ok)
			throw ConfigError("unknown key '" + item.key() + "' in " + what);
	}
}

template <typename T>
void read(const nlohmann::json &j, const char *key, T &out) {
	if (!j.contains(key))
		return;
	try {
		out = j.at(key).get<T>();
	} catch (const nlohmann::json::exception &e) {
		throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
	}
}

} // namespace

nlohmann::ordered_json gen_config_to_json(const GenConfig &c) {
	return {{"d", c.d},
	        {"classes", c.classes},
	        {"train_speakers", c.train_speakers},
	        {"test_speakers", c.test_speakers},
	        {"train_samples", c.train_samples},
	        {"test_samples", c.test_samples},
	        {"min_samples_per_speaker", c.min_samples_per_speaker},
	        {"max_samples_per_speaker", c.max_samples_per_speaker},
	        {"prototype_scale", c.prototype_scale},
	        {"leakage", c.leakage},
	        {"noise", c.noise},
	        {"seed", c.seed}};
}

GenConfig gen_config_from_json(const nlohmann::json &j) {
	check_keys(j, "gen_config",
	           {"d", "classes", "train_speakers", "test_speakers", "train_samples", "test_samples",
	            "min_samples_per_speaker", "max_samples_per_speaker", "prototype_scale", "leakage", "noise", "seed"});
	GenConfig c;
	read(j, "d", c.d);
	read(j, "classes", c.classes);
	read(j, "train_speakers", c.train_speakers);
	read(j, "test_speakers", c.test_speakers);
	read(j, "train_samples", c.train_samples);
	read(j, "test_samples", c.test_samples);
	read(j, "min_samples_per_speaker", c.min_samples_per_speaker);
	read(j, "max_samples_per_speaker", c.max_samples_per_speaker);
	read(j, "prototype_scale", c.prototype_scale);
	read(j, "leakage", c.leakage);
	read(j, "noise", c.noise);
	read(j, "seed", c.seed);
	return c;
}

nlohmann::ordered_json train_recipe_to_json(const TrainRecipe &r) {
	return {{"hidden", r.hidden}, {"epochs", r.epochs},  {"lr", r.lr},
	        {"batch_size", r.batch_size}, {"seed", r.seed}, {"optimizer", r.optimizer}};
}

TrainRecipe train_recipe_from_json(const nlohmann::json &j) {
	check_keys(j, "train_recipe", {"hidden", "epochs", "lr", "batch_size", "seed", "optimizer"});
	TrainRecipe r;
	read(j, "hidden", r.hidden);
	read(j, "epochs", r.epochs);
	read(j, "lr", r.lr);
	read(j, "batch_size", r.batch_size);
	read(j, "seed", r.seed);
	read(j, "optimizer", r.optimizer);
	return r;
}

nlohmann::ordered_json method_config_to_json(const MethodConfig &m) {
	return {{"method", method_id(m.method)},
	        {"lr", m.lr},
	        {"epochs", m.epochs},
	        {"batch_size", m.batch_size},
	        {"k", m.k},
	        {"noise_steps", m.noise_steps},
	        {"noise_lr", m.noise_lr},
	        {"scrub_max_steps", m.scrub_max_steps},
	        {"scrub_min_steps", m.scrub_min_steps},
	        {"retain_weight", m.retain_weight},
	        {"seed", m.seed}};
}

MethodConfig method_config_from_json(const nlohmann::json &j) {
	check_keys(j, "method_grid entry",
	           {"method", "lr", "epochs", "batch_size", "k", "noise_steps", "noise_lr", "scrub_max_steps",
	            "scrub_min_steps", "retain_weight", "seed"});
	MethodConfig m;
	std::string id = "ft";
	read(j, "method", id);
	m.method = method_from_id(id);
	read(j, "lr", m.lr);
	read(j, "epochs", m.epochs);
	read(j, "batch_size", m.batch_size);
	read(j, "k", m.k);
	read(j, "noise_steps", m.noise_steps);
	read(j, "noise_lr", m.noise_lr);
	read(j, "scrub_max_steps", m.scrub_max_steps);
	read(j, "scrub_min_steps", m.scrub_min_steps);
	read(j, "retain_weight", m.retain_weight);
	read(j, "seed", m.seed);
	return m;
}

nlohmann::ordered_json eval_record_to_json(const EvalRecord &r) {
	return {{"method", r.method}, {"lr", r.lr},       {"seed", r.seed}, {"failed", r.failed},
	        {"failure", r.failure}, {"f1_test", r.f1_test}, {"f1_forget", r.f1_forget}, {"mia", r.mia},
	        {"elapsed", r.elapsed}, {"u", r.u},          {"e", r.e},       {"t", r.t},
	        {"gum", r.gum},         {"nomus", r.nomus},  {"speedup", r.speedup}};
}

EvalRecord eval_record_from_json(const nlohmann::json &j) {
	check_keys(j, "record",
	           {"method", "lr", "seed", "failed", "failure", "f1_test", "f1_forget", "mia", "elapsed", "u", "e",
	            "t", "gum", "nomus", "speedup"});
	EvalRecord r;
	read(j, "method", r.method);
	read(j, "lr", r.lr);
	read(j, "seed", r.seed);
	read(j, "failed", r.failed);
	read(j, "failure", r.failure);
	read(j, "f1_test", r.f1_test);
	read(j, "f1_forget", r.f1_forget);
	read(j, "mia", r.mia);
	read(j, "elapsed", r.elapsed);
	read(j, "u", r.u);
	read(j, "e", r.e);
	read(j, "t", r.t);
	read(j, "gum", r.gum);
	read(j, "nomus", r.nomus);
	read(j, "speedup", r.speedup);
	return r;
}

nlohmann::ordered_json experiment_config_to_json(const ExperimentConfig &c) {
	nlohmann::ordered_json j;
	j["gen_config"] = gen_config_to_json(c.gen_config);
	j["forget_selection"] = {{"min_samples", c.forget_selection.min_samples},
	                         {"lo", c.forget_selection.lo},
	                         {"hi", c.forget_selection.hi}};
	j["train_recipe"] = train_recipe_to_json(c.train_recipe);
	auto grid = nlohmann::ordered_json::array();
	for (const auto &m : c.method_grid)
		grid.push_back(method_config_to_json(m));
	j["method_grid"] = std::move(grid);
	j["gum_weights"] = {{"alpha", c.gum_weights.alpha}, {"beta", c.gum_weights.beta}};
	j["nomus_accuracy_weight"] = c.nomus_accuracy_weight;
	j["seeds"] = c.seeds;
	j["output_dir"] = c.output_dir;
	j["report_formats"] = c.report_formats;
	j["lr_scale"] = c.lr_scale;
	j["clock"] = c.clock;
	j["workers"] = c.workers;
	return j;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json &j) {
	check_keys(j, "experiment config",
	           {"gen_config", "forget_selection", "train_recipe", "method_grid", "gum_weights",
	            "nomus_accuracy_weight", "seeds", "output_dir", "report_formats", "lr_scale", "clock", "workers"});
	ExperimentConfig c;
	if (j.contains("gen_config"))
		c.gen_config = gen_config_from_json(j.at("gen_config"));
	if (j.contains("forget_selection")) {
		const auto &f = j.at("forget_selection");
		check_keys(f, "forget_selection", {"min_samples", "lo", "hi"});
		read(f, "min_samples", c.forget_selection.min_samples);
		read(f, "lo", c.forget_selection.lo);
		read(f, "hi", c.forget_selection.hi);
	}
	if (j.contains("train_recipe"))
		c.train_recipe = train_recipe_from_json(j.at("train_recipe"));
	if (j.contains("method_grid")) {
		if (!j.at("method_grid").is_array())
			throw ConfigError("method_grid must be an array");
		c.method_grid.clear();
		for (const auto &m : j.at("method_grid"))
			c.method_grid.push_back(method_config_from_json(m));
	}
	if (j.contains("gum_weights")) {
		const auto &w = j.at("gum_weights");
		check_keys(w, "gum_weights", {"alpha", "beta"});
		read(w, "alpha", c.gum_weights.alpha);
		read(w, "beta", c.gum_weights.beta);
	}
	read(j, "nomus_accuracy_weight", c.nomus_accuracy_weight);
	read(j, "seeds", c.seeds);
	read(j, "output_dir", c.output_dir);
	read(j, "report_formats", c.report_formats);
	read(j, "lr_scale", c.lr_scale);
	read(j, "clock", c.clock);
	read(j, "workers", c.workers);
	return c;
}

ExperimentConfig load_experiment_config(const std::string &path) {
	std::ifstream in(path);
	if (!in)
		throw IoError("cannot open config '" + path + "'");
	nlohmann::json j;
	try {
		j = nlohmann::json::parse(in);
	} catch (const nlohmann::json::exception &e) {
		throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
	}
	return experiment_config_from_json(j);
}

} // namespace unbench
