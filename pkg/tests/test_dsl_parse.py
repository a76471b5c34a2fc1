import pytest

from pipeforge.dsl import ArgumentNode, ChainNode, parse
from pipeforge.errors import PipelineSyntaxError

MINIMAL = """
Pipeline "Local" "repo" {
    tool "T" "Cfg" {
        command "run" {
            argument "x" "1"
        }
    }
}
"""


def wrap(entries: str) -> str:
    return MINIMAL.replace('argument "x" "1"', entries)


# --------------------------------------------------------------------------
# Happy path
# --------------------------------------------------------------------------


def test_assembly_counts(assembly_ast):
    assert [t.tool_name for t in assembly_ast.tools] == ["Trimmomatic", "Velvet", "Blast"]
    commands = [c for t in assembly_ast.tools for c in t.commands]
    assert [c.name for c in commands] == [
        "trimmomatic", "velveth", "velvetg", "makeblastdb", "blastx",
    ]
    assert sum(len(c.chains) for c in commands) == 3
    assert sum(len(c.arguments) for c in commands) == 23


def test_assembly_repository_header(assembly_ast):
    # Hosted-forge spelling normalizes to the remote provider.
    assert assembly_ast.repository_kind == "Remote"
    assert assembly_ast.repository_location == "https://github.com/seqtools/Repository"


def test_assembly_trimmomatic_block(assembly_ast):
    trimmomatic = assembly_ast.tools[0].commands[0]
    assert len(trimmomatic.arguments) == 13
    assert trimmomatic.chains == []
    assert trimmomatic.entries[0] == ArgumentNode("mode", "SE")
    assert ArgumentNode("seed mismatches", "2") in trimmomatic.entries


def test_assembly_chain_arities(assembly_ast):
    velveth = assembly_ast.tools[1].commands[0]
    assert velveth.chains == [ChainNode("filename", "outputFile")]
    blastx = assembly_ast.tools[2].commands[1]
    assert blastx.entries == [
        ChainNode("-db", "-out"),
        ChainNode("-query", "contigs_fa", tool_name="Velvet",
                  command_name="velvetg"),
        ArgumentNode("-out", "blast.out"),
    ]


def test_three_string_chain_names_command_only():
    node = parse(wrap('chain "a" "step" "out"')).tools[0].commands[0].entries[0]
    assert node == ChainNode("a", "out", command_name="step")
    assert node.tool_name is None


def test_entry_order_preserved():
    pipeline = parse(wrap('chain "a" "o"\nargument "b" "2"\nchain "c" "p"'))
    entries = pipeline.tools[0].commands[0].entries
    assert [type(e).__name__ for e in entries] == [
        "ChainNode", "ArgumentNode", "ChainNode",
    ]


def test_comments_and_formatting_are_ignored():
    text = (
        '// header comment\n'
        'Pipeline "Local" "repo" { // trailing\n'
        'tool "T" "Cfg" {command "run" {\n'
        '// a full-line comment\n'
        '\targument "x" "1"}}}\n'
    )
    assert parse(text) == parse(MINIMAL)


def test_crlf_input():
    assert parse(MINIMAL.replace("\n", "\r\n")) == parse(MINIMAL)


def test_string_escapes():
    pipeline = parse(wrap(r'argument "say \"hi\"" "c:\\tmp"'))
    node = pipeline.tools[0].commands[0].entries[0]
    assert node == ArgumentNode('say "hi"', "c:\\tmp")


def test_keywords_are_fine_inside_strings():
    pipeline = parse(wrap('argument "chain" "tool"'))
    assert pipeline.tools[0].commands[0].entries[0] == ArgumentNode("chain", "tool")


def test_argument_value_may_be_empty():
    node = parse(wrap('argument "flag" ""')).tools[0].commands[0].entries[0]
    assert node == ArgumentNode("flag", "")


def test_lowercase_repository_kinds_accepted():
    for spelling, kind in [("local", "Local"), ("remote", "Remote"),
                           ("github", "Remote")]:
        text = MINIMAL.replace('"Local"', f'"{spelling}"')
        assert parse(text).repository_kind == kind


def test_chain_node_rejects_tool_without_command():
    with pytest.raises(ValueError):
        ChainNode("a", "out", tool_name="T")


# --------------------------------------------------------------------------
# Errors: every failure is a PipelineSyntaxError with a 1-based position
# --------------------------------------------------------------------------


def check_error(text, reason, line=None, column=None):
    with pytest.raises(PipelineSyntaxError) as err:
        parse(text)
    e = err.value
    assert reason in e.reason
    assert e.line >= 1 and e.column >= 1
    if line is not None:
        assert e.line == line
    if column is not None:
        assert e.column == column
    assert str(e) == f"{e.line}:{e.column}: {e.reason}"
    return e


def test_empty_input():
    check_error("", "expected keyword 'Pipeline'", line=1, column=1)


def test_unterminated_string_position():
    check_error('Pipeline "Local', "unterminated string", line=1, column=10)


def test_string_may_not_span_lines():
    check_error('Pipeline "Lo\ncal" "r" {}', "unterminated string", line=1)


def test_unknown_escape():
    check_error(r'Pipeline "Lo\tcal" "r" {}', "unknown escape '\\t'",
                line=1, column=13)


def test_unexpected_character():
    check_error('Pipeline "Local" "r" { @', "unexpected character '@'",
                line=1, column=24)


def test_stray_slash_is_not_a_comment():
    check_error('Pipeline "Local" "r" { / }', "unexpected character '/'")


def test_lowercase_keyword_rejected():
    check_error(MINIMAL.replace("Pipeline", "pipeline"),
                "expected keyword 'Pipeline'")


def test_unquoted_name_rejected():
    check_error(MINIMAL.replace('"T"', 'T'), "expected tool name", line=3)


def test_unknown_repository_kind():
    e = check_error(MINIMAL.replace('"Local"', '"Subversion"'),
                    "unknown repository type", line=2, column=10)
    assert "Subversion" in e.reason


def test_empty_names_rejected():
    check_error(MINIMAL.replace('"run"', '""'), "command name must not be empty")
    check_error(wrap('chain "" "out"'), "chain names must not be empty")


def test_pipeline_needs_a_tool():
    check_error('Pipeline "Local" "repo" { }', "at least one tool")


def test_tool_needs_a_command():
    check_error('Pipeline "Local" "r" { tool "T" "C" { } }',
                "at least one command")


def test_command_needs_an_entry():
    check_error('Pipeline "Local" "r" { tool "T" "C" { command "run" { } } }',
                "at least one argument or chain", line=1, column=39)


def test_argument_missing_value():
    check_error(wrap('argument "x"'), "expected argument value")


def test_chain_arity_too_small():
    e = check_error(wrap('chain "a"'), "chain takes 2 to 4 quoted names, got 1",
                    line=5)
    assert e.column == 13


def test_chain_arity_too_large():
    check_error(wrap('chain "a" "b" "c" "d" "e"'), "got 5")


def test_unknown_entry_keyword():
    check_error(wrap('option "x" "1"'), "expected 'argument', 'chain' or '}'")


def test_missing_closing_brace():
    check_error(MINIMAL.rstrip()[:-1], "expected keyword 'tool'")


def test_trailing_input_rejected():
    check_error(MINIMAL + 'tool "X" "Y" { }', "unexpected trailing input")


def test_error_position_is_in_bounds():
    text = wrap('chain "a" "b" "c" "d" "e"')
    e = check_error(text, "got 5")
    lines = text.split("\n")
    assert e.line <= len(lines)
    assert e.column <= len(lines[e.line - 1]) + 1
