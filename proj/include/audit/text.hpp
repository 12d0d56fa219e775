#pragma once

#include "audit/types.hpp"

#include <string>
#include <vector>

namespace audit {

enum class EditTask { Add, Drop, Replace, Inpaint, SuperResolution };

std::string task_name(EditTask t);
EditTask task_from_name(const std::string& name);

/// Template string with "{}" slots; slot count must match the task arity.
struct InstructionTemplate {
  EditTask task = EditTask::Add;
  std::string text;

  int slot_count() const;
};

/// Replace "{}" slots in order; non-slot characters pass through untouched.
std::string fill_template(const InstructionTemplate& t,
                          const std::vector<std::string>& captions);

/// The built-in template inventory (add x5, drop x2, replace x2, inpaint x4,
/// super-resolution x4).
const std::vector<InstructionTemplate>& builtin_templates();
std::vector<InstructionTemplate> templates_for(EditTask task);

/// Line-delimited "task<TAB>template" file.
std::vector<InstructionTemplate> load_templates(const std::string& path);
void save_templates(const std::string& path,
                    const std::vector<InstructionTemplate>& templates);

/// Normalize a caption for template slots: strip leading filler phrases
/// ("the sound of", "someone", ...) and lowercase.
std::string shorten_caption(const std::string& caption);

/// Sequence of E-dim vectors; rows are token vectors. The empty string maps
/// to a reserved single-vector sequence, never to zero length.
struct TextEmbedding {
  Matrix vectors;  // length x dim

  Eigen::Index length() const { return vectors.rows(); }
  Eigen::Index dim() const { return vectors.cols(); }
  bool operator==(const TextEmbedding& o) const {
    return vectors.rows() == o.vectors.rows() &&
           vectors.cols() == o.vectors.cols() && vectors == o.vectors;
  }
};

struct TextEncoderConfig {
  int dim = 64;        // 768 matches the full-scale preset
  int max_length = 300;
};

/// Deterministic stand-in encoder: lowercase, split on whitespace and
/// punctuation, hash each token to a fixed pseudo-random unit vector.
TextEmbedding encode_text(const std::string& s, const TextEncoderConfig& cfg = {});

/// The empty-text embedding used for classifier-free guidance.
TextEmbedding empty_text_embedding(const TextEncoderConfig& cfg = {});
bool is_empty_embedding(const TextEmbedding& e, const TextEncoderConfig& cfg = {});

std::vector<std::string> tokenize(const std::string& s);

}  // namespace audit
