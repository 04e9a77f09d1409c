import pytest

from src.errors import LexerError
from src.lexer import SegmentKind, byte_offset, clean_comment, scan


def kinds(source):
    return [(s.kind, s.text(source)) for s in scan(source)]


class TestScan:
    def test_segments_cover_source(self):
        source = 'int a = 1; // one\nchar *s = "x"; /* two */ char c = \'/\';\n'
        segments = scan(source)
        assert "".join(s.text(source) for s in segments) == source
        for prev, nxt in zip(segments, segments[1:]):
            assert prev.end == nxt.start

    def test_comment_kinds(self):
        source = "a; // line\nb; /* block */ c;"
        found = [(k, t) for k, t in kinds(source) if k.is_comment]
        assert found == [
            (SegmentKind.LINE_COMMENT, "// line"),
            (SegmentKind.BLOCK_COMMENT, "/* block */"),
        ]

    def test_delimiters_inside_string_are_not_comments(self):
        source = 'char *s = "/* not a comment */"; char *u = "http://x";'
        assert not any(k.is_comment for k, _ in kinds(source))

    def test_escaped_quote_in_string(self):
        source = r'char *s = "a \" // b"; x++;'
        assert not any(k.is_comment for k, _ in kinds(source))

    def test_char_literal_quote(self):
        source = "char q = '\"'; /* real */"
        found = kinds(source)
        assert (SegmentKind.CHAR, "'\"'") in found
        assert (SegmentKind.BLOCK_COMMENT, "/* real */") in found

    def test_directive_segment(self):
        source = "#define OPEN {\nint x;\n"
        found = kinds(source)
        assert found[0] == (SegmentKind.DIRECTIVE, "#define OPEN {")
        assert all(k is not SegmentKind.DIRECTIVE for k, _ in found[1:])

    def test_include_string_stays_in_directive(self):
        source = '#include "a//b.h"\nint x;'
        found = kinds(source)
        assert found[0] == (SegmentKind.DIRECTIVE, '#include "a//b.h"')
        assert not any(k.is_comment for k, _ in found)

    def test_spliced_directive(self):
        source = "#define M(a) \\\n  ((a) + 1)\nint y;"
        found = kinds(source)
        assert found[0][0] is SegmentKind.DIRECTIVE
        assert "((a) + 1)" in found[0][1]

    def test_hash_inside_line_is_code(self):
        found = kinds("x = a # b;")
        assert found == [(SegmentKind.CODE, "x = a # b;")]

    def test_unterminated_block_comment(self):
        with pytest.raises(LexerError) as info:
            scan("int a; /* open")
        assert info.value.offset == 7
        assert "byte offset 7" in str(info.value)

    def test_unterminated_offset_is_in_bytes(self):
        with pytest.raises(LexerError) as info:
            scan("é /* open")
        assert info.value.offset == 3

    def test_empty_source(self):
        assert scan("") == []


class TestCleanComment:
    def test_line_comment(self):
        assert clean_comment("// TODO: fix  ") == "TODO: fix"

    def test_block_gutter(self):
        raw = "/**\n * first line\n *  second\n */"
        assert clean_comment(raw) == "first line\nsecond"

    def test_single_line_block(self):
        assert clean_comment("/* OR the bit field longword -wise. */") == "OR the bit field longword -wise."

    def test_empty_block(self):
        assert clean_comment("/**/") == ""


def test_byte_offset():
    assert byte_offset("abc", 2) == 2
    assert byte_offset("aé b", 3) == 4
