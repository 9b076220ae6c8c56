#include "unbench/errors.hpp"
#include "unbench/nn.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace unbench {

namespace {
constexpr const char *kFormat = "unbench-model";
constexpr int kVersion = 1;
} // namespace

std::string model_to_json(const LayeredModel &model) {
	nlohmann::ordered_json j;
	j["format"] = kFormat;
	j["version"] = kVersion;
	j["dims"] = {{"input", model.dims().input}, {"hidden", model.dims().hidden}, {"classes", model.dims().classes}};
	j["activation"] = to_string(model.activation());
	if (model.seed())
		j["seed"] = *model.seed();
	else
		j["seed"] = nullptr;
	auto layers = nlohmann::ordered_json::array();
	for (const auto &l : model.layers()) {
		nlohmann::ordered_json jl;
		jl["rows"] = l.out;
		jl["cols"] = l.in;
		jl["weights"] = l.weights;
		jl["bias"] = l.bias;
		layers.push_back(std::move(jl));
	}
	j["layers"] = std::move(layers);
	return j.dump(1);
}

LayeredModel model_from_json(const std::string &text) {
	nlohmann::json j;
	try {
		j = nlohmann::json::parse(text);
	} catch (const nlohmann::json::exception &e) {
		throw DataError(std::string("model checkpoint is not valid JSON: ") + e.what());
	}
	try {
		if (j.at("format").get<std::string>() != kFormat)
			throw DataError("not a model checkpoint");
		int version = j.at("version").get<int>();
		if (version != kVersion)
			throw DataError("unsupported checkpoint version " + std::to_string(version));
		ModelDims dims;
		dims.input = j.at("dims").at("input").get<std::size_t>();
		dims.hidden = j.at("dims").at("hidden").get<std::vector<std::size_t>>();
		dims.classes = j.at("dims").at("classes").get<std::size_t>();
		std::optional<std::uint64_t> seed;
		if (!j.at("seed").is_null())
			seed = j.at("seed").get<std::uint64_t>();
		std::vector<Layer> layers;
		for (const auto &jl : j.at("layers")) {
			Layer l;
			l.out = jl.at("rows").get<std::size_t>();
			l.in = jl.at("cols").get<std::size_t>();
			l.weights = jl.at("weights").get<Vector>();
			l.bias = jl.at("bias").get<Vector>();
			layers.push_back(std::move(l));
		}
		LayeredModel m(dims, activation_from_string(j.at("activation").get<std::string>()), std::move(layers), seed);
		if (!m.all_finite())
			throw DataError("model checkpoint contains non-finite parameters");
		return m;
	} catch (const nlohmann::json::exception &e) {
		throw DataError(std::string("malformed model checkpoint: ") + e.what());
	}
}

void save_model(const LayeredModel &model, const std::string &path) {
	std::ofstream out(path);
	if (!out)
		throw IoError("cannot open '" + path + "' for writing");
	out << model_to_json(model) << '\n';
	if (!out)
		throw IoError("failed writing '" + path + "'");
}

LayeredModel load_model(const std::string &path) {
	std::ifstream in(path);
	if (!in)
		throw IoError("cannot open '" + path + "'");
	std::stringstream ss;
	ss << in.rdbuf();
	return model_from_json(ss.str());
}

} // namespace unbench
