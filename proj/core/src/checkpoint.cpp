#include "topdep/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "topdep/error.hpp"

namespace topdep {

namespace {

constexpr std::string_view kMagic = "topdep-checkpoint 1";

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string next_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::BadFormat, "checkpoint header is truncated");
  return line;
}

// Reads "<key> <value>" and returns the value.
std::string field(std::istream& in, std::string_view key) {
  std::string line = next_line(in);
  if (line.size() <= key.size() || line.compare(0, key.size(), key) != 0 || line[key.size()] != ' ') {
    fail(ErrorCode::BadFormat, "checkpoint: expected '" + std::string(key) + "', got '" + line + "'");
  }
  return line.substr(key.size() + 1);
}

template <class T>
T number(const std::string& text, std::string_view what) {
  T value{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    fail(ErrorCode::BadFormat, "checkpoint: bad " + std::string(what) + " '" + text + "'");
  }
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Model& model) {
  const ModelConfig& c = model.config;
  out << kMagic << '\n';
  out << "dim " << c.dim << '\n';
  out << "layers " << c.layers << '\n';
  out << "heads " << c.heads << '\n';
  out << "ffn " << c.ffn << '\n';
  out << "biaffine " << c.biaffine << '\n';
  out << "max_positions " << c.max_positions << '\n';
  out << "dropout " << format_double(c.dropout) << '\n';

  std::ostringstream vocab;
  model.vocab.write(vocab);
  out << "vocab " << model.vocab.size() << '\n' << vocab.str();
  out << "words " << model.words.words().size() << '\n';
  for (const auto& w : model.words.words()) out << w << '\n';

  std::size_t count = 0;
  for_each_tensor(model.params, [&](const std::string&, const Eigen::MatrixXd&) { ++count; });
  out << "tensors " << count << '\n';
  for_each_tensor(model.params, [&](const std::string& name, const Eigen::MatrixXd& t) {
    out << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
  });
  out << "data\n";
  for_each_tensor(model.params, [&](const std::string&, const Eigen::MatrixXd& t) {
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(t(i, j)));
        const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                               static_cast<char>((bits >> 16) & 0xff),
                               static_cast<char>((bits >> 24) & 0xff)};
        out.write(bytes, 4);
      }
    }
  });
}

Model read_checkpoint(std::istream& in) {
  if (next_line(in) != kMagic) fail(ErrorCode::BadFormat, "not a topdep checkpoint");
  ModelConfig c;
  c.dim = number<int>(field(in, "dim"), "dim");
  c.layers = number<int>(field(in, "layers"), "layers");
  c.heads = number<int>(field(in, "heads"), "heads");
  c.ffn = number<int>(field(in, "ffn"), "ffn");
  c.biaffine = number<int>(field(in, "biaffine"), "biaffine");
  c.max_positions = number<int>(field(in, "max_positions"), "max_positions");
  c.dropout = number<double>(field(in, "dropout"), "dropout");

  const auto symbols = number<std::size_t>(field(in, "vocab"), "vocab size");
  std::ostringstream vocab_text;
  for (std::size_t i = 0; i < symbols; ++i) vocab_text << next_line(in) << '\n';
  std::istringstream vocab_in(vocab_text.str());
  Vocabulary vocab = Vocabulary::read(vocab_in);

  const auto word_count = number<std::size_t>(field(in, "words"), "word count");
  std::vector<std::string> words;
  words.reserve(word_count);
  for (std::size_t i = 0; i < word_count; ++i) words.push_back(next_line(in));

  Model model = make_model(c, std::move(vocab), WordIndex(std::move(words)));
  std::size_t expected = 0;
  for_each_tensor(model.params, [&](const std::string&, const Eigen::MatrixXd&) { ++expected; });
  if (number<std::size_t>(field(in, "tensors"), "tensor count") != expected) {
    fail(ErrorCode::BadFormat, "checkpoint tensor count does not match its config");
  }
  for_each_tensor(model.params, [&](const std::string& name, const Eigen::MatrixXd& t) {
    const std::string want = name + ' ' + std::to_string(t.rows()) + ' ' + std::to_string(t.cols());
    const std::string got = next_line(in);
    if (got != want) fail(ErrorCode::BadFormat, "checkpoint manifest: expected '" + want + "', got '" + got + "'");
  });
  if (next_line(in) != "data") fail(ErrorCode::BadFormat, "checkpoint data marker missing");

  for_each_tensor(model.params, [&](const std::string& name, Eigen::MatrixXd& t) {
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        unsigned char bytes[4];
        if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
          fail(ErrorCode::BadFormat, "checkpoint data truncated in " + name);
        }
        const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                                   (static_cast<std::uint32_t>(bytes[1]) << 8) |
                                   (static_cast<std::uint32_t>(bytes[2]) << 16) |
                                   (static_cast<std::uint32_t>(bytes[3]) << 24);
        t(i, j) = static_cast<double>(std::bit_cast<float>(bits));
      }
    }
  });
  if (in.peek() != std::char_traits<char>::eof()) {
    fail(ErrorCode::BadFormat, "trailing bytes after checkpoint data");
  }
  return model;
}

void save_checkpoint(const std::string& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  write_checkpoint(out, model);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace topdep
