import math

import pytest

from app.core.actions import (
    CLICK,
    DRAG,
    SCROLL,
    TYPE_TEXT,
    Action,
    ActionTag,
    ActionType,
    parse_records,
    parse_records_lenient,
    serialize_records,
    validate_action,
)
from app.core.errors import RecordError

LINE = (
    '{"image":"a.pgm","predicted":{"type":"click","points":[[10,20]]},'
    '"target":{"type":"click","points":[[12,22]]}}'
)


class TestActionType:
    def test_known_tags(self):
        assert ActionType.parse("Click") == CLICK
        assert ActionType.parse("type") == TYPE_TEXT

    def test_other_normalised(self):
        t = ActionType.parse("  Hover ")
        assert t.tag is ActionTag.OTHER
        assert t.label == "hover"
        assert t == ActionType.parse("HOVER")
        assert t != ActionType.parse("press")

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ActionType.parse("  ")


class TestParse:
    def test_single_record(self):
        (rec,) = parse_records(LINE)
        assert rec.image_ref == "a.pgm"
        assert rec.predicted.points == ((10.0, 20.0),)
        assert rec.target.points == ((12.0, 22.0),)
        assert rec.line == 1

    def test_empty_input(self):
        assert parse_records("") == []

    def test_blank_lines_keep_numbering(self):
        recs = parse_records(["\n", LINE + "\n", "   \n", LINE])
        assert [r.line for r in recs] == [2, 4]

    def test_unknown_fields_ignored(self):
        (rec,) = parse_records(LINE[:-1] + ',"extra":1}')
        assert rec.task_id is None

    def test_bad_point_arity(self):
        bad = '{"image":"a.pgm","target":{"type":"click","points":[[10]]}}'
        with pytest.raises(RecordError, match="point must have 2 coordinates") as exc:
            parse_records(LINE + "\n" + bad)
        assert exc.value.line == 2

    def test_malformed_json(self):
        with pytest.raises(RecordError, match="line 1"):
            parse_records("{not json")

    def test_missing_field(self):
        with pytest.raises(RecordError, match="missing required field 'target'"):
            parse_records('{"image":"a.pgm"}')

    def test_prediction_optional(self):
        (rec,) = parse_records('{"image":"a.pgm","target":{"type":"scroll","points":[[1,2]]}}')
        assert rec.predicted is None
        assert rec.target.kind == SCROLL

    def test_lenient_keeps_positions(self):
        out = parse_records_lenient([LINE, "oops", LINE])
        assert [type(o).__name__ for o in out] == ["StepRecord", "RecordError", "StepRecord"]
        assert out[1].line == 2

    def test_serialize_then_parse(self):
        recs = parse_records(LINE + "\n" + LINE.replace('"a.pgm"', '"b.pgm"'))
        again = parse_records(serialize_records(recs))
        assert [r.to_json() for r in again] == [r.to_json() for r in recs]


class TestValidate:
    def test_click_ok(self):
        assert validate_action(Action.click(3, 4)) == []

    def test_drag_arity(self):
        assert validate_action(Action(kind=DRAG, points=((1, 1),))) == ["drag requires 2 points"]

    def test_click_arity(self):
        assert "click requires 1 point" in validate_action(Action(kind=CLICK, points=()))

    def test_type_text_caret(self):
        assert validate_action(Action(kind=TYPE_TEXT)) == []
        assert validate_action(Action(kind=TYPE_TEXT, points=((1, 1), (2, 2)))) == ["type allows at most 1 point"]

    def test_negative_coordinate(self):
        assert validate_action(Action.click(-1, 4)) == ["point out of range"]

    def test_non_finite(self):
        assert validate_action(Action.click(math.inf, 4)) == ["point not finite"]

    def test_other_any_arity(self):
        assert validate_action(Action(kind=ActionType.parse("hover"), points=((1, 1), (2, 2), (3, 3)))) == []


class TestRescale:
    def test_identity_at_unit_scale(self):
        a = Action.click(1500.0, 1001.0)
        assert a.rescaled(1.0, 1000, 667) is a

    def test_edge_point_lands_on_resized_edge(self):
        # 1500x1001 resizes to 1000x667; 1001 * (1000 / 1500) is 667.33
        a = Action.click(1500.0, 1001.0).rescaled(1000 / 1500, 1000, 667)
        assert a.points == ((1000.0, 667.0),)

    def test_interior_point_scaled(self):
        a = Action(kind=DRAG, points=((300.0, 150.0), (600.0, 0.0))).rescaled(0.5, 1000, 500)
        assert a.kind == DRAG
        assert a.points == ((150.0, 75.0), (300.0, 0.0))

    def test_far_outside_left_alone(self):
        a = Action.click(1700.0, 10.0).rescaled(1000 / 1500, 1000, 667)
        assert a.points[0][0] > 1000.0
