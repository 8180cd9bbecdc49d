#pragma once

#include <map>
#include <string>

#include "geotracknet/io/container.hpp"
#include "geotracknet/vrnn/train.hpp"

namespace geotracknet::vrnn {

inline constexpr const char* kCheckpointMagic = "GTNCKPT1";

struct HistorySummary {
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double best_validation_elbo = 0.0;
};

// Checkpoint container: JSON header with the four-hot spec, layer sizes and
// a tensor directory (name/shape/byte offset into the payload), followed by
// the raw little-endian binary64 tensor data in directory order.
inline void save_checkpoint(const std::string& path, const VrnnModel& model,
                            std::uint64_t training_seed, const HistorySummary& history,
                            const nlohmann::json& provenance = {}) {
  io::Container c;
  auto& self = const_cast<VrnnModel&>(model);
  nlohmann::json dir = nlohmann::json::array();
  for (auto& [name, tensor] : self.named_parameters()) {
    dir.push_back({{"name", name},
                   {"shape", tensor->shape()},
                   {"offset", c.payload.size()},
                   {"count", tensor->size()}});
    io::append_doubles(c.payload, tensor->data(), tensor->size());
  }
  c.header = {{"format", "gtn.checkpoint"},
              {"format_version", 1},
              {"spec", model.spec},
              {"hidden", model.hidden},
              {"latent", model.latent},
              {"width", model.width},
              {"dim", model.dim()},
              {"version", model.version},
              {"init_seed", model.init_seed},
              {"training_seed", training_seed},
              {"history",
               {{"epochs", history.epochs},
                {"best_epoch", history.best_epoch},
                {"best_validation_elbo", history.best_validation_elbo}}},
              {"tensors", dir}};
  if (!provenance.is_null() && !provenance.empty()) c.header["provenance"] = provenance;
  io::write_container(path, kCheckpointMagic, c);
}

inline VrnnModel load_checkpoint(const std::string& path) {
  io::Container c = io::read_container(path, kCheckpointMagic);
  const auto& h = c.header;
  if (h.at("format_version").get<int>() != 1)
    throw DataError("checkpoint: unsupported format_version");

  VrnnModel m;
  m.spec = h.at("spec").get<fourhot::FourHotSpec>();
  m.spec.validate();
  m.hidden = h.at("hidden").get<std::size_t>();
  m.latent = h.at("latent").get<std::size_t>();
  m.width = h.at("width").get<std::size_t>();
  m.version = h.at("version").get<std::string>();
  m.init_seed = h.at("init_seed").get<std::uint64_t>();
  if (m.latent != m.hidden) throw DataError("checkpoint: latent size must equal hidden size");

  // Spec and stored dimension must agree: the spec is authoritative for D.
  const std::size_t dim = h.at("dim").get<std::size_t>();
  if (dim != m.spec.dim())
    throw fourhot::SpecMismatch("checkpoint: stored dim " + std::to_string(dim) +
                                " does not match spec dim " + std::to_string(m.spec.dim()));

  // Materialize tensors with the expected shapes, then fill from payload.
  VrnnModel shaped = VrnnModel::create(m.spec, m.hidden, m.width, 0);
  m.lstm = shaped.lstm;
  m.prior = shaped.prior;
  m.posterior = shaped.posterior;
  m.emis_hidden = shaped.emis_hidden;
  m.emis_logits = shaped.emis_logits;

  std::map<std::string, Tensor*> by_name;
  for (auto& [name, tensor] : m.named_parameters()) by_name[name] = tensor;

  std::size_t seen = 0;
  for (const auto& entry : h.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint: unknown tensor '" + name + "'");
    Tensor& t = *it->second;
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape != t.shape())
      throw fourhot::SpecMismatch("checkpoint: tensor '" + name + "' has unexpected shape");
    io::read_doubles(c.payload, entry.at("offset").get<std::size_t>(), t.data(), t.size());
    ++seen;
  }
  if (seen != by_name.size()) throw DataError("checkpoint: missing tensors in directory");
  return m;
}

inline HistorySummary checkpoint_history(const std::string& path) {
  io::Container c = io::read_container(path, kCheckpointMagic);
  HistorySummary s;
  const auto& h = c.header.at("history");
  s.epochs = h.at("epochs").get<std::size_t>();
  s.best_epoch = h.at("best_epoch").get<std::size_t>();
  s.best_validation_elbo = h.at("best_validation_elbo").get<double>();
  return s;
}

}  // namespace geotracknet::vrnn
