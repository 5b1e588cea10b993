#include "hwm/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "hwm/error.hpp"
#include "json.hpp"

namespace hwm {

namespace {

std::string shape_str(const std::vector<size_t>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace

void Checkpoint::put(const std::string& section, const std::string& name, const nn::Mat& m) {
  sections_[section][name] = Tensor{{m.rows, m.cols}, m.data};
}

void Checkpoint::put(const std::string& section, const std::string& name, const nn::Vec& v) {
  sections_[section][name] = Tensor{{v.size()}, v};
}

void Checkpoint::put(const std::string& section, const std::string& name, const nn::Mlp& mlp) {
  for (size_t l = 0; l < mlp.w.size(); ++l) {
    put(section, name + ".w" + std::to_string(l), mlp.w[l]);
    put(section, name + ".b" + std::to_string(l), mlp.b[l]);
  }
}

const Checkpoint::Tensor& Checkpoint::find(const std::string& section,
                                           const std::string& name) const {
  auto sit = sections_.find(section);
  if (sit == sections_.end()) {
    throw Error(ErrorKind::ModelLoad, "missing section '" + section + "'");
  }
  auto tit = sit->second.find(name);
  if (tit == sit->second.end()) {
    throw Error(ErrorKind::ModelLoad, "missing tensor '" + section + "/" + name + "'");
  }
  return tit->second;
}

nn::Mat Checkpoint::get_mat(const std::string& section, const std::string& name,
                            size_t rows, size_t cols) const {
  const Tensor& t = find(section, name);
  std::vector<size_t> want{rows, cols};
  if (t.shape != want) {
    throw Error(ErrorKind::ModelLoad, "tensor '" + section + "/" + name + "' has shape " +
                                          shape_str(t.shape) + ", expected " + shape_str(want));
  }
  nn::Mat m(rows, cols);
  m.data = t.data;
  return m;
}

nn::Vec Checkpoint::get_vec(const std::string& section, const std::string& name,
                            size_t n) const {
  const Tensor& t = find(section, name);
  std::vector<size_t> want{n};
  if (t.shape != want) {
    throw Error(ErrorKind::ModelLoad, "tensor '" + section + "/" + name + "' has shape " +
                                          shape_str(t.shape) + ", expected " + shape_str(want));
  }
  return t.data;
}

nn::Mlp Checkpoint::get_mlp(const std::string& section, const std::string& name,
                            const std::vector<size_t>& dims) const {
  if (dims.size() < 2) {
    throw Error(ErrorKind::ModelLoad, "mlp '" + name + "' needs at least two dims");
  }
  nn::Mlp m;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    m.w.push_back(get_mat(section, name + ".w" + std::to_string(l), dims[l + 1], dims[l]));
    m.b.push_back(get_vec(section, name + ".b" + std::to_string(l), dims[l + 1]));
  }
  return m;
}

bool Checkpoint::has_section(const std::string& section) const {
  return sections_.count(section) > 0;
}

std::string Checkpoint::serialize() const {
  nlohmann::json root;
  root["format"] = "hwm-checkpoint";
  root["version"] = 1;
  nlohmann::json sections = nlohmann::json::object();
  for (const auto& [sname, tensors] : sections_) {
    nlohmann::json sec = nlohmann::json::object();
    for (const auto& [tname, t] : tensors) {
      sec[tname] = {{"shape", t.shape}, {"data", t.data}};
    }
    sections[sname] = std::move(sec);
  }
  root["sections"] = std::move(sections);
  return root.dump();
}

Checkpoint Checkpoint::deserialize(const std::string& text) {
  nlohmann::json root = nlohmann::json::parse(text, nullptr, false);
  if (root.is_discarded() || !root.is_object()) {
    throw Error(ErrorKind::ModelLoad, "checkpoint is not valid JSON");
  }
  if (root.value("format", "") != "hwm-checkpoint") {
    throw Error(ErrorKind::ModelLoad, "unrecognized checkpoint format");
  }
  Checkpoint ck;
  const auto& sections = root.at("sections");
  for (auto sit = sections.begin(); sit != sections.end(); ++sit) {
    for (auto tit = sit.value().begin(); tit != sit.value().end(); ++tit) {
      Tensor t;
      t.shape = tit.value().at("shape").get<std::vector<size_t>>();
      t.data = tit.value().at("data").get<std::vector<double>>();
      size_t n = 1;
      for (size_t d : t.shape) n *= d;
      if (t.shape.empty()) n = 0;
      if (n != t.data.size()) {
        throw Error(ErrorKind::ModelLoad, "tensor '" + sit.key() + "/" + tit.key() +
                                              "' data length does not match its shape");
      }
      ck.sections_[sit.key()][tit.key()] = std::move(t);
    }
  }
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << serialize();
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace hwm
