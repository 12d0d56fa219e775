#include "audit/text.hpp"

#include <doctest.h>

#include <filesystem>
#include <set>

using namespace audit;

TEST_CASE("the canonical add instruction is produced verbatim") {
  InstructionTemplate t{EditTask::Add, "Add {} in the background"};
  CHECK(fill_template(t, {"baby crying"}) == "Add baby crying in the background");
}

TEST_CASE("the canonical replace instruction is produced verbatim") {
  InstructionTemplate t{EditTask::Replace, "Replace {} with {}"};
  CHECK(fill_template(t, {"clapping", "guitar"}) ==
        "Replace clapping with guitar");
}

TEST_CASE("zero-slot templates pass through unchanged") {
  InstructionTemplate t{EditTask::Inpaint, "Inpaint"};
  CHECK(fill_template(t, {}) == "Inpaint");
}

TEST_CASE("fill_template rejects arity mismatches") {
  InstructionTemplate t{EditTask::Drop, "Drop {}"};
  CHECK_THROWS_AS(fill_template(t, {}), std::invalid_argument);
  CHECK_THROWS_AS(fill_template(t, {"a", "b"}), std::invalid_argument);
}

TEST_CASE("fill_template never alters non-slot characters") {
  Rng rng(13);
  const std::string pieces[] = {"Lower the ", " near the ", "pitch", "!",
                                " {} ", "{}"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string tmpl;
    int slots = 0;
    for (int i = 0; i < 5; ++i) {
      const std::string& p = pieces[rng.uniform_int(6)];
      slots += p.find("{}") != std::string::npos;
      tmpl += p;
    }
    InstructionTemplate t{EditTask::Add, tmpl};
    std::vector<std::string> caps(slots, "X");
    std::string filled = fill_template(t, caps);
    // removing the caption text must give back the template minus its slots
    std::string expected = tmpl;
    size_t pos;
    while ((pos = expected.find("{}")) != std::string::npos)
      expected.replace(pos, 2, "X");
    CHECK(filled == expected);
  }
}

TEST_CASE("builtin inventory matches the documented counts") {
  CHECK(templates_for(EditTask::Add).size() == 5);
  CHECK(templates_for(EditTask::Drop).size() == 2);
  CHECK(templates_for(EditTask::Replace).size() == 2);
  CHECK(templates_for(EditTask::Inpaint).size() == 4);
  CHECK(templates_for(EditTask::SuperResolution).size() == 4);
}

TEST_CASE("builtin templates round-trip through the template file") {
  namespace fs = std::filesystem;
  std::string path = (fs::temp_directory_path() / "audit_templates.tsv").string();
  save_templates(path, builtin_templates());
  auto loaded = load_templates(path);
  REQUIRE(loaded.size() == builtin_templates().size());
  for (size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].task == builtin_templates()[i].task);
    CHECK(loaded[i].text == builtin_templates()[i].text);
  }
  fs::remove(path);
}

TEST_CASE("every builtin template fills without error") {
  for (const auto& t : builtin_templates()) {
    std::vector<std::string> caps(t.slot_count(), "dog barking");
    std::string s = fill_template(t, caps);
    CHECK(!s.empty());
    if (t.slot_count() > 0) CHECK(s.find("dog barking") != std::string::npos);
  }
}

TEST_CASE("caption shortening strips filler phrases and lowercases") {
  CHECK(shorten_caption("Someone clapping") == "clapping");
  CHECK(shorten_caption("The sound of guitar") == "guitar");
  CHECK(shorten_caption("Dog barking") == "dog barking");
}

TEST_CASE("encode_text is deterministic") {
  TextEmbedding a = encode_text("drop dog barking");
  TextEmbedding b = encode_text("drop dog barking");
  CHECK(a == b);
}

TEST_CASE("empty string maps to the reserved one-vector sequence") {
  TextEmbedding e = encode_text("");
  CHECK(e.length() == 1);
  CHECK(is_empty_embedding(e));
  // distinct from any ordinary token vector
  TextEmbedding w = encode_text("empty");
  CHECK((e.vectors.row(0) - w.vectors.row(0)).norm() > 1e-6);
}

TEST_CASE("differing tokens perturb only their own positions") {
  TextEmbedding a = encode_text("drop dog barking");
  TextEmbedding b = encode_text("drop cat meowing");
  REQUIRE(a.length() == 3);
  REQUIRE(b.length() == 3);
  CHECK(a.vectors.row(0) == b.vectors.row(0));
  CHECK((a.vectors.row(1) - b.vectors.row(1)).norm() > 1e-6);
  CHECK((a.vectors.row(2) - b.vectors.row(2)).norm() > 1e-6);
}

TEST_CASE("tokenization lowercases and splits on punctuation") {
  auto t = tokenize("Inpaint: A Cat, meowing!");
  REQUIRE(t.size() == 4);
  CHECK(t[0] == "inpaint");
  CHECK(t[1] == "a");
  CHECK(t[2] == "cat");
  CHECK(t[3] == "meowing");
}

TEST_CASE("token vectors are collision-free over the working vocabulary") {
  std::vector<std::string> vocab;
  for (const auto& t : builtin_templates())
    for (const auto& tok : tokenize(t.text)) vocab.push_back(tok);
  for (const auto& w : {"dog", "cat", "guitar", "clapping", "barking", "bell",
                        "tone", "chirp", "noise", "drone", "beeps", "crying"})
    vocab.push_back(w);

  std::set<std::string> seen;
  std::vector<TextEmbedding> embs;
  for (const auto& w : vocab) {
    if (!seen.insert(w).second) continue;
    embs.push_back(encode_text(w));
  }
  for (size_t i = 0; i < embs.size(); ++i)
    for (size_t j = i + 1; j < embs.size(); ++j)
      CHECK((embs[i].vectors - embs[j].vectors).norm() > 1e-6);
}

TEST_CASE("sequences are truncated at max_length") {
  TextEncoderConfig cfg;
  cfg.max_length = 4;
  std::string s = "one two three four five six";
  TextEmbedding e = encode_text(s, cfg);
  CHECK(e.length() == 4);
}
