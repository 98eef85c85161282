#include <fstream>

#include "crowdbelief/errors.hpp"
#include "crowdbelief/gibbs.hpp"
#include "json.hpp"

namespace crowdbelief {

namespace {

using nlohmann::json;

json path_to_json(const StatePath& p) { return json(p.x); }

}  // namespace

void write_chain(const std::filesystem::path& path, const ChainFile& chain) {
  std::ofstream out(path);
  if (!out) {
    throw io_error("cannot open " + path.string() + " for writing");
  }
  json header = {
      {"type", "header"},
      {"format", "crowdbelief-chain"},
      {"version", 1},
      {"question_ids", chain.question_ids},
      {"groups", chain.groups},
      {"ref_group", chain.ref_group},
  };
  out << header.dump() << '\n';
  for (const auto& d : chain.draws) {
    json rec = {
        {"type", "draw"},
        {"bias", d.bias},
        {"obs_var", d.obs_var},
        {"drift", d.drift},
        {"state_var", d.state_var},
    };
    json paths = json::array();
    for (const auto& p : d.paths) paths.push_back(path_to_json(p));
    rec["paths"] = std::move(paths);
    if (d.beta) rec["beta"] = *d.beta;
    out << rec.dump() << '\n';
  }
  if (!out) {
    throw io_error("failed while writing " + path.string());
  }
}

ChainFile read_chain(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw io_error("cannot open " + path.string() + " for reading");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw io_error(path.string() + ": empty chain file");
  }
  ChainFile chain;
  try {
    const json header = json::parse(line);
    if (header.value("format", "") != "crowdbelief-chain") {
      throw io_error(path.string() + ": not a crowdbelief chain file");
    }
    chain.question_ids = header.at("question_ids").get<std::vector<std::string>>();
    chain.groups = header.at("groups").get<int>();
    chain.ref_group = header.at("ref_group").get<int>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json rec = json::parse(line);
      ConstrainedDraw d;
      d.bias = rec.at("bias").get<std::vector<double>>();
      d.obs_var = rec.at("obs_var").get<std::vector<double>>();
      d.drift = rec.at("drift").get<std::vector<double>>();
      d.state_var = rec.at("state_var").get<std::vector<double>>();
      for (const auto& p : rec.at("paths")) {
        StatePath sp;
        sp.x = p.get<std::vector<double>>();
        d.paths.push_back(std::move(sp));
      }
      if (rec.contains("beta")) d.beta = rec.at("beta").get<double>();
      if (d.paths.size() != chain.question_ids.size()) {
        throw io_error(path.string() + ": draw covers " + std::to_string(d.paths.size()) +
                       " questions, header lists " + std::to_string(chain.question_ids.size()));
      }
      chain.draws.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw io_error(path.string() + ": malformed chain file: " + e.what());
  }
  return chain;
}

}  // namespace crowdbelief
