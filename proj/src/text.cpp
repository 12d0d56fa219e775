#include "audit/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace audit {

std::string task_name(EditTask t) {
  switch (t) {
    case EditTask::Add: return "add";
    case EditTask::Drop: return "drop";
    case EditTask::Replace: return "replace";
    case EditTask::Inpaint: return "inpaint";
    case EditTask::SuperResolution: return "super-resolution";
  }
  throw std::logic_error("task_name: bad task");
}

EditTask task_from_name(const std::string& name) {
  if (name == "add") return EditTask::Add;
  if (name == "drop") return EditTask::Drop;
  if (name == "replace") return EditTask::Replace;
  if (name == "inpaint") return EditTask::Inpaint;
  if (name == "super-resolution" || name == "superres")
    return EditTask::SuperResolution;
  throw std::invalid_argument("unknown task: " + name);
}

int InstructionTemplate::slot_count() const {
  int n = 0;
  for (size_t i = 0; i + 1 < text.size(); ++i)
    if (text[i] == '{' && text[i + 1] == '}') ++n;
  return n;
}

std::string fill_template(const InstructionTemplate& t,
                          const std::vector<std::string>& captions) {
  if (int(captions.size()) != t.slot_count())
    throw std::invalid_argument("fill_template: arity mismatch for \"" +
                                t.text + "\"");
  std::string out;
  out.reserve(t.text.size() + 32);
  size_t slot = 0;
  for (size_t i = 0; i < t.text.size(); ++i) {
    if (i + 1 < t.text.size() && t.text[i] == '{' && t.text[i + 1] == '}') {
      out += captions[slot++];
      ++i;
    } else {
      out += t.text[i];
    }
  }
  return out;
}

const std::vector<InstructionTemplate>& builtin_templates() {
  static const std::vector<InstructionTemplate> all = {
      {EditTask::Add, "Add {} in the beginning"},
      {EditTask::Add, "Add {} at the beginning"},
      {EditTask::Add, "Add {} in the end"},
      {EditTask::Add, "Add {} in the middle"},
      {EditTask::Add, "Add {} in the background"},
      {EditTask::Drop, "Drop {}"},
      {EditTask::Drop, "Remove {}"},
      {EditTask::Replace, "Replace {} to {}"},
      {EditTask::Replace, "Replace {} with {}"},
      {EditTask::Inpaint, "Inpaint"},
      {EditTask::Inpaint, "Inpainting"},
      {EditTask::Inpaint, "Inpaint {}"},
      {EditTask::Inpaint, "Inpaint: {}"},
      {EditTask::SuperResolution, "Increase resolution"},
      {EditTask::SuperResolution, "Increase resolution: {}"},
      {EditTask::SuperResolution, "Perform super-resolution"},
      {EditTask::SuperResolution, "Perform super-resolution: {}"},
  };
  return all;
}

std::vector<InstructionTemplate> templates_for(EditTask task) {
  std::vector<InstructionTemplate> out;
  for (const auto& t : builtin_templates())
    if (t.task == task) out.push_back(t);
  return out;
}

std::vector<InstructionTemplate> load_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_templates: cannot open " + path);
  std::vector<InstructionTemplate> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("load_templates: missing tab in: " + line);
    out.push_back({task_from_name(line.substr(0, tab)), line.substr(tab + 1)});
  }
  return out;
}

void save_templates(const std::string& path,
                    const std::vector<InstructionTemplate>& templates) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_templates: cannot open " + path);
  for (const auto& t : templates)
    out << task_name(t.task) << "\t" << t.text << "\n";
}

std::string shorten_caption(const std::string& caption) {
  std::string s;
  s.reserve(caption.size());
  for (char c : caption) s += char(std::tolower((unsigned char)c));
  static const std::vector<std::string> fillers = {
      "the sound of ", "sound of ", "someone ", "a person ", "the ",
  };
  bool stripped = true;
  while (stripped) {
    stripped = false;
    for (const auto& f : fillers)
      if (s.rfind(f, 0) == 0 && s.size() > f.size()) {
        s.erase(0, f.size());
        stripped = true;
      }
  }
  // trim
  while (!s.empty() && std::isspace((unsigned char)s.front())) s.erase(s.begin());
  while (!s.empty() && std::isspace((unsigned char)s.back())) s.pop_back();
  return s;
}

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : s) {
    unsigned char u = (unsigned char)c;
    if (std::isalnum(u) || u >= 0x80) {
      cur += char(std::tolower(u));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

namespace {

Vector token_vector(const std::string& token, int dim) {
  Rng rng(fnv1a(token));
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.normal();
  v.normalize();
  return v;
}

}  // namespace

TextEmbedding empty_text_embedding(const TextEncoderConfig& cfg) {
  TextEmbedding e;
  e.vectors.resize(1, cfg.dim);
  // reserved sentinel outside any tokenizable string
  e.vectors.row(0) = token_vector("\x01<empty>\x01", cfg.dim).transpose();
  return e;
}

TextEmbedding encode_text(const std::string& s, const TextEncoderConfig& cfg) {
  auto tokens = tokenize(s);
  if (tokens.empty()) return empty_text_embedding(cfg);
  Eigen::Index n = std::min<Eigen::Index>(tokens.size(), cfg.max_length);
  TextEmbedding e;
  e.vectors.resize(n, cfg.dim);
  for (Eigen::Index i = 0; i < n; ++i)
    e.vectors.row(i) = token_vector(tokens[i], cfg.dim).transpose();
  return e;
}

bool is_empty_embedding(const TextEmbedding& e, const TextEncoderConfig& cfg) {
  return e.length() == 1 && e == empty_text_embedding(cfg);
}

}  // namespace audit
