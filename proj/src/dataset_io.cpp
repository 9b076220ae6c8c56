#include "unbench/datagen.hpp"
#include "unbench/errors.hpp"
#include "unbench/config.hpp"
#include "unbench/text.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace unbench {

void export_dataset(const DatasetBundle &bundle, const std::string &stem) {
	const auto csv_path = stem + ".csv";
	std::ofstream csv(csv_path);
	if (!csv)
		throw IoError("cannot open '" + csv_path + "' for writing");
	for (std::size_t j = 0; j < bundle.config.d; ++j)
		csv << "x_" << j << ',';
	csv << "y,s\n";
	auto write = [&](const Sample &s) {
		for (double v : s.x)
			csv << format_double(v) << ',';
		csv << s.y << ',' << s.s << '\n';
	};
	for (const auto &s : bundle.train)
		write(s);
	for (const auto &s : bundle.test)
		write(s);
	if (!csv)
		throw IoError("failed writing '" + csv_path + "'");

	nlohmann::ordered_json meta;
	meta["format"] = "unbench-dataset";
	meta["version"] = 1;
	meta["seed"] = bundle.seed;
	meta["gen_config"] = gen_config_to_json(bundle.config);
	meta["train_rows"] = bundle.train.size();
	meta["test_rows"] = bundle.test.size();
	meta["train_speakers"] = bundle.train_speakers();
	meta["test_speakers"] = bundle.test_speakers();
	auto reg = nlohmann::ordered_json::array();
	for (auto [sp, c] : bundle.speakers)
		reg.push_back({{"speaker", sp}, {"count", c}});
	meta["speakers"] = std::move(reg);
	const auto meta_path = stem + ".meta.json";
	std::ofstream m(meta_path);
	if (!m)
		throw IoError("cannot open '" + meta_path + "' for writing");
	m << meta.dump(2) << '\n';
	if (!m)
		throw IoError("failed writing '" + meta_path + "'");
}

DatasetBundle import_dataset(const std::string &stem) {
	const auto meta_path = stem + ".meta.json";
	std::ifstream m(meta_path);
	if (!m)
		throw IoError("cannot open '" + meta_path + "'");
	nlohmann::json meta;
	try {
		meta = nlohmann::json::parse(m);
	} catch (const nlohmann::json::exception &e) {
		throw DataError(std::string("dataset metadata is not valid JSON: ") + e.what());
	}

	DatasetBundle b;
	std::size_t train_rows = 0, test_rows = 0;
	try {
		if (meta.at("format").get<std::string>() != "unbench-dataset")
			throw DataError("'" + meta_path + "' is not dataset metadata");
		b.seed = meta.at("seed").get<std::uint64_t>();
		b.config = gen_config_from_json(meta.at("gen_config"));
		train_rows = meta.at("train_rows").get<std::size_t>();
		test_rows = meta.at("test_rows").get<std::size_t>();
		for (const auto &e : meta.at("speakers"))
			b.speakers[e.at("speaker").get<SpeakerId>()] = e.at("count").get<std::size_t>();
	} catch (const nlohmann::json::exception &e) {
		throw DataError(std::string("malformed dataset metadata: ") + e.what());
	}

	const auto csv_path = stem + ".csv";
	std::ifstream csv(csv_path);
	if (!csv)
		throw IoError("cannot open '" + csv_path + "'");
	std::string line;
	std::getline(csv, line);
	const std::size_t d = b.config.d;
	auto header = split_fields(line, ',');
	if (header.size() != d + 2 || header[d] != "y" || header[d + 1] != "s")
		throw DataError("dataset header does not match the metadata dimension");
	std::size_t row = 0;
	while (std::getline(csv, line)) {
		if (line.empty())
			continue;
		auto fields = split_fields(line, ',');
		if (fields.size() != d + 2)
			throw DataError("row " + std::to_string(row) + " has " + std::to_string(fields.size()) + " fields");
		Sample s;
		s.x.resize(d);
		for (std::size_t j = 0; j < d; ++j)
			s.x[j] = parse_double(fields[j]);
		s.y = static_cast<int>(parse_int(fields[d]));
		s.s = static_cast<SpeakerId>(parse_int(fields[d + 1]));
		(row < train_rows ? b.train : b.test).push_back(std::move(s));
		++row;
	}
	if (b.train.size() != train_rows || b.test.size() != test_rows)
		throw DataError("row counts disagree with the metadata");
	b.validate();
	return b;
}

} // namespace unbench
