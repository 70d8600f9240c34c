#include "cotrap/source_model.hpp"

#include "cotrap/error.hpp"
#include "helpers.hpp"

#include <doctest.h>

using namespace cotrap;
using cotrap::testutil::TempDir;
using cotrap::testutil::write_file;

namespace {

SourceFile file_of(const std::string& text) { return SourceFile::from_text("t.py", text); }

// 40-line fixture mixing docstrings with fake comments, trailing comments,
// strings with hashes, continuations, and exactly two full-line comment runs
// (annotated by hand: lines 9-10 and 19-20).
const char* kAnnotatedFixture =
    "#!/usr/bin/env python3\n"                          // 1 shebang: excluded
    "# -*- coding: utf-8 -*-\n"                         // 2 encoding: excluded
    "\"\"\"Module docstring.\n"                          // 3
    "\n"                                                // 4
    "# fake comment inside docstring\n"                 // 5
    "\"\"\"\n"                                           // 6
    "import os\n"                                       // 7
    "\n"                                                // 8
    "# configure retry counts here\n"                    // 9  run 1
    "# before enabling the cache\n"                      // 10 run 1
    "x = 1  # trailing comment stays code\n"             // 11
    "s = \"text with # hash\"\n"                         // 12
    "t = '''\n"                                          // 13
    "# fake inside triple quotes\n"                      // 14
    "'''\n"                                              // 15
    "u = \"escaped \\\" quote # still string\"\n"        // 16
    "\n"                                                // 17
    "def f():\n"                                        // 18
    "    # tracer.record(x)\n"                           // 19 run 2
    "    # tracer.flush()\n"                             // 20 run 2
    "    return os.name\n"                               // 21
    "\n"                                                // 22
    "v = [1,\n"                                          // 23
    "     2]\n"                                          // 24
    "w = f\"prefix {x} and # inside\"\n"                  // 25
    "long_str = \"line one \\\n"                          // 26
    "# continues the string\"\n"                          // 27
    "\n"                                                // 28
    "z = 'quoted # one'\n"                               // 29
    "\n"                                                // 30
    "result = (x +\n"                                    // 31
    "          1)\n"                                     // 32
    "\n"                                                // 33
    "if x:\n"                                            // 34
    "    pass\n"                                         // 35
    "\n"                                                // 36
    "\n"                                                // 37
    "final = True\n"                                     // 38
    "done = [z]\n"                                       // 39
    "count = len(v)\n";                                  // 40

} // namespace

TEST_CASE("comment-free input yields no blocks") {
    CHECK(extract_comment_blocks(file_of("x = 1\ny = 2\n")).empty());
    CHECK(extract_comment_blocks(file_of("")).empty());
}

TEST_CASE("three consecutive full-line comments form one maximal block") {
    SourceFile f = file_of("a = 1\nb = 2\nc = 3\n# one\n# two\n# three\nd = 4\n");
    auto blocks = extract_comment_blocks(f);
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].span == LineSpan{4, 6});
    CHECK(blocks[0].lines.size() == 3);
}

TEST_CASE("annotated 40-line fixture yields exactly the two hand-marked runs") {
    SourceFile f = file_of(kAnnotatedFixture);
    REQUIRE(f.line_count == 40);
    auto blocks = extract_comment_blocks(f);
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].span == LineSpan{9, 10});
    CHECK(blocks[1].span == LineSpan{19, 20});
    CHECK(blocks[1].lines[0] == "    # tracer.record(x)");
}

TEST_CASE("blocks are disjoint, sorted, and capture the original bytes") {
    SourceFile f = file_of(kAnnotatedFixture);
    Lines lines = split_lines(f.text);
    auto blocks = extract_comment_blocks(f);
    int previous_end = 0;
    for (const CommentBlock& block : blocks) {
        CHECK(block.span.start_line > previous_end);
        previous_end = block.span.end_line;
        CHECK(static_cast<int>(block.lines.size()) == block.span.length());
        for (int l = block.span.start_line; l <= block.span.end_line; ++l)
            CHECK(block.lines[static_cast<std::size_t>(l - block.span.start_line)] ==
                  lines.lines[static_cast<std::size_t>(l - 1)]);
    }
}

TEST_CASE("extraction is pure: same text, same blocks under any path") {
    SourceFile a = SourceFile::from_text("a.py", "# one\n# two\n");
    SourceFile b = SourceFile::from_text("other/b.py", "# one\n# two\n");
    auto ba = extract_comment_blocks(a);
    auto bb = extract_comment_blocks(b);
    REQUIRE(ba.size() == bb.size());
    CHECK(ba[0].span == bb[0].span);
    CHECK(ba[0].lines == bb[0].lines);
}

TEST_CASE("shebang and encoding lines never join blocks") {
    SourceFile f = file_of("#!/usr/bin/env python3\n# real comment\nx = 1\n");
    auto blocks = extract_comment_blocks(f);
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].span == LineSpan{2, 2});

    // An encoding declaration only counts on lines 1-2.
    SourceFile g = file_of("x = 1\ny = 2\n# coding: utf-8\n");
    auto gb = extract_comment_blocks(g);
    REQUIRE(gb.size() == 1);
    CHECK(gb[0].span == LineSpan{3, 3});
}

TEST_CASE("comment detection tracks string state across lines") {
    SourceFile f = file_of("s = '''start\n# not a comment\n'''\n# yes\n");
    auto blocks = extract_comment_blocks(f);
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].span == LineSpan{4, 4});

    SourceFile g = file_of("s = 'one \\\n# still inside'\n# real\n");
    auto gb = extract_comment_blocks(g);
    REQUIRE(gb.size() == 1);
    CHECK(gb[0].span == LineSpan{3, 3});
}

TEST_CASE("glob matching") {
    CHECK(glob_match("**/*.py", "a/b/c.py"));
    CHECK(glob_match("**/*.py", "top.py"));
    CHECK_FALSE(glob_match("**/*.py", "a/b/c.txt"));
    CHECK(glob_match("src/**", "src/deep/file.py"));
    CHECK(glob_match("*.py", "top.py"));
    CHECK_FALSE(glob_match("*.py", "a/top.py"));
    CHECK(glob_match("**/test_*.py", "pkg/tests/test_x.py"));
}

TEST_CASE("corpus enumeration") {
    TempDir tmp("corpus");

    SUBCASE("empty directory") {
        CorpusListing listing = enumerate_corpus(tmp.path);
        CHECK(listing.files.empty());
        CHECK(listing.skips.empty());
    }

    SUBCASE("default filter keeps the sorted .py files") {
        write_file(tmp.path / "b.py", "x = 1\n");
        write_file(tmp.path / "a.py", "y = 2\n");
        write_file(tmp.path / "sub" / "c.py", "z = 3\n");
        write_file(tmp.path / "notes.txt", "prose\n");
        CorpusListing listing = enumerate_corpus(tmp.path);
        REQUIRE(listing.files.size() == 3);
        CHECK(listing.files[0].path == "a.py");
        CHECK(listing.files[1].path == "b.py");
        CHECK(listing.files[2].path == "sub/c.py");
    }

    SUBCASE("size bounds record skips") {
        write_file(tmp.path / "small.py", "x = 1\n");
        write_file(tmp.path / "big.py", std::string(4096, 'x'));
        CorpusFilter filter;
        filter.max_bytes = 1024;
        CorpusListing listing = enumerate_corpus(tmp.path, filter);
        REQUIRE(listing.files.size() == 1);
        CHECK(listing.files[0].path == "small.py");
        REQUIRE(listing.skips.size() == 1);
        CHECK(listing.skips[0].path == "big.py");
    }

    SUBCASE("excluded directories are pruned") {
        write_file(tmp.path / "keep.py", "x = 1\n");
        write_file(tmp.path / ".venv" / "lib.py", "y = 2\n");
        CorpusFilter filter;
        filter.exclude_globs = {".venv/**"};
        CorpusListing listing = enumerate_corpus(tmp.path, filter);
        REQUIRE(listing.files.size() == 1);
        CHECK(listing.files[0].path == "keep.py");
    }

    SUBCASE("missing root is fatal") {
        CHECK_THROWS_AS(enumerate_corpus(tmp.path / "nope"), Error);
    }
}

TEST_CASE("reading source files") {
    TempDir tmp("read");
    write_file(tmp.path / "ok.py", "x = 1\n");
    write_file(tmp.path / "bad.py", std::string("x = \xFF\xFE\n"));

    std::string reason;
    auto ok = read_source_file(tmp.path, "ok.py", &reason);
    REQUIRE(ok.has_value());
    CHECK(ok->line_count == 1);

    auto bad = read_source_file(tmp.path, "bad.py", &reason);
    CHECK_FALSE(bad.has_value());
    CHECK(reason == "not valid UTF-8");

    auto missing = read_source_file(tmp.path, "absent.py", &reason);
    CHECK_FALSE(missing.has_value());
}
