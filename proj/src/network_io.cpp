// Network persistence.
//
// JSON:   {"activation": "tanh", "layers": [{"rows": r, "cols": c,
//          "weights": [row-major], "bias": [...]}, ...]}
//         Numbers are written with 17 significant digits so every double
//         survives a round trip bit for bit.
//
// Binary (all integers and floats little-endian):
//   "LNET" | u32 version=1 | u32 activation (0 relu, 1 tanh, 2 sigmoid)
//   | u32 flags (bit 0: biases present) | u32 layer count
//   | layer table: (u64 rows, u64 cols) per layer
//   | payload: per layer, rows·cols f64 weights then rows f64 bias if flagged

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "lipbound/errors.hpp"
#include "lipbound/network.hpp"

namespace lipbound {

namespace {

constexpr char kMagic[4] = {'L', 'N', 'E', 'T'};
constexpr std::uint32_t kBinaryVersion = 1;
// Guards allocation against corrupt headers; far beyond any desk-scale net.
constexpr std::uint64_t kMaxLayerEntries = std::uint64_t{1} << 32;

void append_double(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

void append_array(std::string& out, std::span<const double> values) {
  out.push_back('[');
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out.push_back(',');
    append_double(out, values[i]);
  }
  out.push_back(']');
}

std::uint32_t activation_code(Activation a) {
  switch (a) {
    case Activation::relu: return 0;
    case Activation::tanh: return 1;
    case Activation::sigmoid: return 2;
  }
  return 0;
}

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw ParseError("binary network: truncated file");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 4;  // after magic
};

Network parse_network_binary(std::string_view bytes) {
  ByteReader in(bytes);
  const auto version = in.get<std::uint32_t>();
  if (version != kBinaryVersion) {
    throw ParseError("binary network: unsupported version " + std::to_string(version));
  }
  const auto act = in.get<std::uint32_t>();
  if (act > 2) throw ParseError("binary network: unknown activation code " + std::to_string(act));
  const auto flags = in.get<std::uint32_t>();
  const auto count = in.get<std::uint32_t>();
  if (count == 0) throw ParseError("binary network: no layers");
  std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes(count);
  for (auto& [r, c] : shapes) {
    r = in.get<std::uint64_t>();
    c = in.get<std::uint64_t>();
    if (r == 0 || c == 0 || r > kMaxLayerEntries / c) {
      throw ParseError("binary network: invalid layer shape");
    }
  }
  const bool has_bias = (flags & 1U) != 0;
  std::vector<DenseMatrix> weights;
  std::vector<Vector> biases;
  for (const auto& [r, c] : shapes) {
    Vector w(r * c);
    for (double& v : w) v = in.get_f64();
    try {
      weights.emplace_back(r, c, std::move(w));
    } catch (const InvalidArgument& e) {
      throw ParseError(std::string("binary network: ") + e.what());
    }
    if (has_bias) {
      Vector b(r);
      for (double& v : b) v = in.get_f64();
      biases.push_back(std::move(b));
    }
  }
  if (!in.at_end()) throw ParseError("binary network: trailing bytes");
  const Activation activation = act == 0 ? Activation::relu
                                : act == 1 ? Activation::tanh
                                           : Activation::sigmoid;
  try {
    return Network(std::move(weights), has_bias ? std::optional(std::move(biases)) : std::nullopt,
                   activation);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("binary network: ") + e.what());
  }
}

std::string network_to_binary(const Network& net) {
  std::string out(kMagic, 4);
  put_le(out, kBinaryVersion);
  put_le(out, activation_code(net.activation()));
  put_le(out, std::uint32_t{net.biases() ? 1U : 0U});
  put_le(out, static_cast<std::uint32_t>(net.weights().size()));
  for (const auto& w : net.weights()) {
    put_le(out, static_cast<std::uint64_t>(w.rows()));
    put_le(out, static_cast<std::uint64_t>(w.cols()));
  }
  for (std::size_t k = 0; k < net.weights().size(); ++k) {
    for (double v : net.weights()[k].entries()) put_f64(out, v);
    if (net.biases()) {
      for (double v : (*net.biases())[k]) put_f64(out, v);
    }
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return ss.str();
}

Vector json_doubles(const nlohmann::json& arr, const std::string& what) {
  if (!arr.is_array()) throw ParseError(what + " must be an array");
  Vector out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw ParseError(what + " must contain only numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::string network_to_json(const Network& net) {
  std::string out = "{\"activation\":\"";
  out += to_string(net.activation());
  out += "\",\"layers\":[";
  for (std::size_t k = 0; k < net.weights().size(); ++k) {
    const auto& w = net.weights()[k];
    if (k) out += ',';
    out += "\n{\"rows\":" + std::to_string(w.rows()) + ",\"cols\":" + std::to_string(w.cols()) +
           ",\"weights\":";
    append_array(out, w.entries());
    if (net.biases()) {
      out += ",\"bias\":";
      append_array(out, (*net.biases())[k]);
    }
    out += '}';
  }
  out += "]}\n";
  return out;
}

Network parse_network_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("network JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("network JSON: top level must be an object");
  if (!doc.contains("activation") || !doc["activation"].is_string()) {
    throw ParseError("network JSON: missing string field 'activation'");
  }
  if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty()) {
    throw ParseError("network JSON: 'layers' must be a non-empty array");
  }
  const Activation activation = activation_from_string(doc["activation"].get<std::string>());

  std::vector<DenseMatrix> weights;
  std::vector<Vector> biases;
  std::size_t with_bias = 0;
  const auto& layers = doc["layers"];
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& layer = layers[k];
    const std::string where = "network JSON layer " + std::to_string(k + 1);
    if (!layer.is_object()) throw ParseError(where + ": must be an object");
    for (const char* key : {"rows", "cols"}) {
      if (!layer.contains(key) || !layer[key].is_number_unsigned()) {
        throw ParseError(where + ": '" + key + "' must be a non-negative integer");
      }
    }
    if (!layer.contains("weights")) throw ParseError(where + ": missing 'weights'");
    const auto rows = layer["rows"].get<std::size_t>();
    const auto cols = layer["cols"].get<std::size_t>();
    Vector w = json_doubles(layer["weights"], where + " weights");
    if (w.size() != rows * cols) {
      throw ParseError(where + ": expected " + std::to_string(rows * cols) + " weights, found " +
                       std::to_string(w.size()));
    }
    weights.emplace_back(rows, cols, std::move(w));
    if (layer.contains("bias")) {
      ++with_bias;
      biases.push_back(json_doubles(layer["bias"], where + " bias"));
    }
  }
  if (with_bias != 0 && with_bias != layers.size()) {
    throw ParseError("network JSON: either every layer or no layer may carry a bias");
  }
  try {
    return Network(std::move(weights),
                   with_bias ? std::optional(std::move(biases)) : std::nullopt, activation);
  } catch (const DimensionMismatch& e) {
    throw ParseError(std::string("network JSON: ") + e.what());
  }
}

Network load_network(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0) {
    return parse_network_binary(bytes);
  }
  return parse_network_json(bytes);
}

void save_network(const Network& net, const std::filesystem::path& path, NetworkFormat format) {
  if (format == NetworkFormat::automatic) {
    format = path.extension() == ".lnet" ? NetworkFormat::binary : NetworkFormat::json;
  }
  const std::string bytes =
      format == NetworkFormat::binary ? network_to_binary(net) : network_to_json(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

}  // namespace lipbound
