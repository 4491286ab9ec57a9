#include "atd/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace atd {

using nlohmann::json;

const NamedTensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw InvalidArgument("checkpoint has no tensor '" + name + "'");
}

int Checkpoint::meta_int(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw InvalidArgument("checkpoint missing meta '" + key + "'");
  return std::stoi(it->second);
}

double Checkpoint::meta_double(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw InvalidArgument("checkpoint missing meta '" + key + "'");
  return std::stod(it->second);
}

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  json j;
  j["schema"] = kCheckpointSchema;
  j["role"] = ckpt.role;
  j["backend"] = ckpt.backend;
  std::ostringstream hash;
  hash << std::hex << ckpt.schedule_hash;
  j["schedule_hash"] = hash.str();
  j["meta"] = ckpt.meta;
  j["tensors"] = json::array();
  for (const auto& t : ckpt.tensors)
    j["tensors"].push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}, {"data", t.data}});
  return j.dump();
}

Checkpoint checkpoint_from_string(const std::string& text) {
  json j = json::parse(text);
  require(j.value("schema", "") == kCheckpointSchema, "not an atd checkpoint (schema tag mismatch)");
  Checkpoint c;
  c.role = j.at("role").get<std::string>();
  c.backend = j.at("backend").get<std::string>();
  c.schedule_hash = std::stoull(j.at("schedule_hash").get<std::string>(), nullptr, 16);
  c.meta = j.at("meta").get<std::map<std::string, std::string>>();
  for (const auto& jt : j.at("tensors")) {
    NamedTensor t;
    t.name = jt.at("name").get<std::string>();
    t.rows = jt.at("shape").at(0).get<Index>();
    t.cols = jt.at("shape").at(1).get<Index>();
    t.data = jt.at("data").get<std::vector<double>>();
    require(static_cast<Index>(t.data.size()) == t.rows * t.cols, "checkpoint tensor '" + t.name + "' size mismatch");
    c.tensors.push_back(std::move(t));
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << checkpoint_to_string(ckpt) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_string(buf.str());
}

}  // namespace atd
