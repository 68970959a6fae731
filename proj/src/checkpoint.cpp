#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bradcn/errors.hpp"
#include "bradcn/pipeline.hpp"

namespace bradcn {

namespace {

constexpr char kMagic[8] = {'B', 'R', 'A', 'D', 'C', 'N', 'C', 'K'};

nlohmann::json config_to_json(const ModelConfig& cfg) {
  return {{"patch_size", cfg.patch_size},
          {"embed_dim", cfg.embed_dim},
          {"num_transformer_blocks", cfg.num_transformer_blocks},
          {"num_heads", cfg.num_heads},
          {"reassemble_strides", cfg.reassemble_strides},
          {"fusion_channels", cfg.fusion_channels},
          {"adcn_base_channels", cfg.adcn_base_channels},
          {"adcn_depth", cfg.adcn_depth},
          {"backbone_channels", cfg.backbone_channels},
          {"seed", cfg.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.patch_size = j.at("patch_size").get<int64_t>();
  cfg.embed_dim = j.at("embed_dim").get<int64_t>();
  cfg.num_transformer_blocks = j.at("num_transformer_blocks").get<int64_t>();
  cfg.num_heads = j.at("num_heads").get<int64_t>();
  cfg.reassemble_strides = j.at("reassemble_strides").get<std::vector<int64_t>>();
  cfg.fusion_channels = j.at("fusion_channels").get<int64_t>();
  cfg.adcn_base_channels = j.at("adcn_base_channels").get<int64_t>();
  cfg.adcn_depth = j.at("adcn_depth").get<int64_t>();
  cfg.backbone_channels = j.at("backbone_channels").get<std::vector<int64_t>>();
  cfg.seed = j.at("seed").get<uint64_t>();
  return cfg;
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  return value;
}

std::string read_bytes(std::istream& in, size_t n, const char* what) {
  std::string buf(n, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(n));
  if (!in) throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  return buf;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json header;
  header["config"] = config_to_json(ckpt.config);
  header["progress"] = {{"stage_index", ckpt.progress.stage_index},
                        {"epoch", ckpt.progress.epoch},
                        {"step_in_epoch", ckpt.progress.step_in_epoch},
                        {"global_step", ckpt.progress.global_step}};

  nlohmann::json tensors = nlohmann::json::array();
  uint64_t offset = 0;
  std::vector<torch::Tensor> payload;
  for (const auto& [name, tensor] : ckpt.parameters) {
    auto t = tensor.detach().to(torch::kFloat32).contiguous();
    tensors.push_back({{"name", name},
                       {"shape", std::vector<int64_t>(t.sizes().begin(), t.sizes().end())},
                       {"offset", offset}});
    offset += static_cast<uint64_t>(t.numel()) * sizeof(float);
    payload.push_back(t);
  }
  header["tensors"] = tensors;
  header["tensor_bytes"] = offset;
  header["optimizer_bytes"] = ckpt.optimizer_state.size();
  header["rng_bytes"] = ckpt.rng_state.size();

  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<uint32_t>(out, static_cast<uint32_t>(ckpt.schema_version));
  write_pod<uint64_t>(out, header_text.size());
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const auto& t : payload) {
    out.write(reinterpret_cast<const char*>(t.data_ptr<float>()),
              static_cast<std::streamsize>(t.numel() * sizeof(float)));
  }
  out.write(ckpt.optimizer_state.data(), static_cast<std::streamsize>(ckpt.optimizer_state.size()));
  out.write(ckpt.rng_state.data(), static_cast<std::streamsize>(ckpt.rng_state.size()));
  if (!out) throw CheckpointError("error while writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());

  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a checkpoint file: " + path.string());
  }
  const auto version = read_pod<uint32_t>(in, "schema version");
  if (version != kCheckpointSchemaVersion) {
    std::ostringstream msg;
    msg << "checkpoint schema version " << version << " unsupported (expected "
        << kCheckpointSchemaVersion << ")";
    throw CheckpointError(msg.str());
  }
  const auto header_len = read_pod<uint64_t>(in, "header length");
  const auto header_text = read_bytes(in, header_len, "header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.schema_version = version;
  try {
    ckpt.config = config_from_json(header.at("config"));
    const auto& p = header.at("progress");
    ckpt.progress.stage_index = p.at("stage_index").get<int64_t>();
    ckpt.progress.epoch = p.at("epoch").get<int64_t>();
    ckpt.progress.step_in_epoch = p.at("step_in_epoch").get<int64_t>();
    ckpt.progress.global_step = p.at("global_step").get<int64_t>();

    for (const auto& entry : header.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<std::vector<int64_t>>();
      int64_t numel = 1;
      for (auto d : shape) numel *= d;
      auto data = read_bytes(in, static_cast<size_t>(numel) * sizeof(float), "tensor payload");
      auto t = torch::from_blob(data.data(), shape, torch::kFloat32).clone();
      ckpt.parameters[name] = t;
    }
    ckpt.optimizer_state =
        read_bytes(in, header.at("optimizer_bytes").get<size_t>(), "optimizer state");
    ckpt.rng_state = read_bytes(in, header.at("rng_bytes").get<size_t>(), "rng state");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  return ckpt;
}

Checkpoint snapshot_model(BradcnModel& model, const torch::optim::Optimizer* optimizer,
                          const TrainProgress& progress) {
  Checkpoint ckpt;
  ckpt.config = model->cfg;
  ckpt.progress = progress;
  for (const auto& pair : model->named_parameters()) {
    ckpt.parameters[pair.key()] = pair.value().detach().clone();
  }
  if (optimizer != nullptr) {
    torch::serialize::OutputArchive archive;
    optimizer->save(archive);
    std::string buffer;
    archive.save_to([&buffer](const void* data, size_t size) {
      buffer.append(static_cast<const char*>(data), size);
      return size;
    });
    ckpt.optimizer_state = std::move(buffer);
  }
  {
    auto gen = at::detail::getDefaultCPUGenerator();
    auto state = gen.get_state();
    ckpt.rng_state.assign(reinterpret_cast<const char*>(state.data_ptr<uint8_t>()),
                          static_cast<size_t>(state.numel()));
  }
  return ckpt;
}

namespace {

void restore_rng(const Checkpoint& ckpt) {
  if (ckpt.rng_state.empty()) return;
  auto state = torch::empty({static_cast<int64_t>(ckpt.rng_state.size())}, torch::kUInt8);
  std::memcpy(state.data_ptr<uint8_t>(), ckpt.rng_state.data(), ckpt.rng_state.size());
  auto gen = at::detail::getDefaultCPUGenerator();
  gen.set_state(state);
}

}  // namespace

void apply_checkpoint(BradcnModel& model, const Checkpoint& ckpt) {
  if (!(ckpt.config == model->cfg)) {
    throw CheckpointError("checkpoint config does not match the model config");
  }
  auto params = model->named_parameters();
  if (static_cast<size_t>(params.size()) != ckpt.parameters.size()) {
    std::ostringstream msg;
    msg << "checkpoint holds " << ckpt.parameters.size() << " parameters but the model has "
        << params.size();
    throw CheckpointError(msg.str());
  }
  torch::NoGradGuard no_grad;
  for (const auto& pair : params) {
    auto it = ckpt.parameters.find(pair.key());
    if (it == ckpt.parameters.end()) {
      throw CheckpointError("checkpoint missing parameter '" + pair.key() + "'");
    }
    if (it->second.sizes() != pair.value().sizes()) {
      throw CheckpointError("checkpoint parameter '" + pair.key() + "' has mismatched shape");
    }
    pair.value().copy_(it->second);
  }
  restore_rng(ckpt);
}

void adopt_groups(BradcnModel& model, const Checkpoint& ckpt,
                  const std::vector<std::string>& group_prefixes) {
  torch::NoGradGuard no_grad;
  for (const auto& pair : model->named_parameters()) {
    bool wanted = false;
    for (const auto& prefix : group_prefixes) {
      if (pair.key().rfind(prefix, 0) == 0) {
        wanted = true;
        break;
      }
    }
    if (!wanted) continue;
    auto it = ckpt.parameters.find(pair.key());
    if (it == ckpt.parameters.end()) {
      throw CheckpointError("checkpoint missing parameter '" + pair.key() + "'");
    }
    if (it->second.sizes() != pair.value().sizes()) {
      throw CheckpointError("checkpoint parameter '" + pair.key() + "' has mismatched shape");
    }
    pair.value().copy_(it->second);
  }
}

BradcnModel model_from_checkpoint(const Checkpoint& ckpt) {
  auto model = make_model(ckpt.config);
  apply_checkpoint(model, ckpt);
  return model;
}

}  // namespace bradcn
