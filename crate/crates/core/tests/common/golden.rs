//! Hand-built (response, ground truth) vectors with their expected scores.

use webfactory::env::ActionKind;
use webfactory::rewards::{GroundTruthStep, Rule};
use webfactory::sitegen::BBox;

pub struct Golden {
    pub name: &'static str,
    pub raw: String,
    pub gt: GroundTruthStep,
    pub rf: u8,
    pub racc: u8,
    pub rule: Rule,
}

pub const LISTING_ANSWERS: [&str; 3] = ["11:00", "11 am", "opens at 11:00"];

/// Target box (100, 200, 50, 30); center (125, 215).
pub fn target() -> BBox {
    BBox::new(100, 200, 50, 30)
}

fn wire(json: &str) -> String {
    format!("<think>look at the page</think><answer>{json}</answer>")
}

fn click_at(x: f64, y: f64) -> String {
    wire(&format!(r#"{{"action":"click","point":[{x},{y}]}}"#))
}

fn text_act(act: &str, text: &str) -> String {
    wire(&format!(r#"{{"action":"{act}","point":[-100,-100],"text":"{text}"}}"#))
}

fn g(name: &'static str, raw: String, gt: GroundTruthStep, rf: u8, racc: u8, rule: Rule) -> Golden {
    Golden {
        name,
        raw,
        gt,
        rf,
        racc,
        rule,
    }
}

pub fn vectors() -> Vec<Golden> {
    use ActionKind::{DoubleClick, Keypress, Scroll, Type, Wait};
    use Rule::*;
    let click = || GroundTruthStep::click(target());
    let dclick = || GroundTruthStep {
        gt_bbox: Some(target()),
        ..GroundTruthStep::of_type(DoubleClick)
    };
    let answers = || GroundTruthStep::answers(&LISTING_ANSWERS);
    let drag_up = || GroundTruthStep::drag((300.0, 600.0), (300.0, 400.0));
    vec![
        // click family
        g("click inside the box", click_at(105.0, 210.0), click(), 1, 1, Click),
        g("click on the box corner", click_at(100.0, 200.0), click(), 1, 1, Click),
        g("click far away", click_at(600.0, 700.0), click(), 1, 0, Click),
        g("center +140 px right", click_at(265.0, 215.0), click(), 1, 1, Click),
        g("center +141 px right", click_at(266.0, 215.0), click(), 1, 0, Click),
        g("center +139 px right", click_at(264.0, 215.0), click(), 1, 1, Click),
        g("center +140 px down", click_at(125.0, 355.0), click(), 1, 1, Click),
        g("center +141 px down", click_at(125.0, 356.0), click(), 1, 0, Click),
        g("center -141 px left", click_at(-16.0, 215.0), click(), 1, 0, Click),
        g("diagonal just outside", click_at(224.0, 314.0), click(), 1, 0, Click),
        g("diagonal just inside", click_at(223.0, 314.0), click(), 1, 1, Click),
        g(
            "double click inside",
            wire(r#"{"action":"double_click","point":[120,220]}"#),
            dclick(),
            1,
            1,
            Click,
        ),
        // type gate
        g(
            "click against double click",
            click_at(120.0, 220.0),
            dclick(),
            1,
            0,
            TypeMismatch,
        ),
        g(
            "scroll against click",
            text_act("scroll", "DOWN"),
            click(),
            1,
            0,
            TypeMismatch,
        ),
        g(
            "answer against click",
            text_act("get_final_answer", "11:00"),
            click(),
            1,
            0,
            TypeMismatch,
        ),
        g(
            "wait against type",
            wire(r#"{"action":"wait","point":[-100,-100]}"#),
            GroundTruthStep::text(Type, "x"),
            1,
            0,
            TypeMismatch,
        ),
        // text family and the F1 threshold
        g(
            "type exact",
            text_act("type", "Cafe A"),
            GroundTruthStep::text(Type, "Cafe A"),
            1,
            1,
            TextF1,
        ),
        g(
            "type case folded",
            text_act("type", "cafe a"),
            GroundTruthStep::text(Type, "Cafe A"),
            1,
            1,
            TextF1,
        ),
        g(
            "type F1 exactly 0.5",
            text_act("type", "cafe"),
            GroundTruthStep::text(Type, "cafe a b"),
            1,
            1,
            TextF1,
        ),
        g(
            "type F1 0.5 by overlap",
            text_act("type", "Cafe B"),
            GroundTruthStep::text(Type, "Cafe A"),
            1,
            1,
            TextF1,
        ),
        g(
            "type F1 0.4",
            text_act("type", "cafe"),
            GroundTruthStep::text(Type, "cafe a b c"),
            1,
            0,
            TextF1,
        ),
        g(
            "type disjoint",
            text_act("type", "pizza"),
            GroundTruthStep::text(Type, "Cafe A"),
            1,
            0,
            TextF1,
        ),
        g(
            "keypress match",
            text_act("keypress", "ENTER"),
            GroundTruthStep::text(Keypress, "ENTER"),
            1,
            1,
            TextF1,
        ),
        g(
            "keypress wrong key",
            text_act("keypress", "TAB"),
            GroundTruthStep::text(Keypress, "ENTER"),
            1,
            0,
            TextF1,
        ),
        g(
            "scroll match",
            text_act("scroll", "DOWN"),
            GroundTruthStep::text(Scroll, "DOWN"),
            1,
            1,
            TextF1,
        ),
        g(
            "scroll wrong way",
            text_act("scroll", "UP"),
            GroundTruthStep::text(Scroll, "DOWN"),
            1,
            0,
            TextF1,
        ),
        // answers
        g(
            "answer 11:00",
            text_act("get_final_answer", "11:00"),
            answers(),
            1,
            1,
            AnswerF1,
        ),
        g(
            "answer 11 am",
            text_act("get_final_answer", "11 am"),
            answers(),
            1,
            1,
            AnswerF1,
        ),
        g(
            "answer opens at 11:00",
            text_act("get_final_answer", "opens at 11:00"),
            answers(),
            1,
            1,
            AnswerF1,
        ),
        g(
            "answer with punctuation",
            text_act("get_final_answer", "Opens at 11:00."),
            answers(),
            1,
            1,
            AnswerF1,
        ),
        g(
            "answer closed",
            text_act("get_final_answer", "closed"),
            answers(),
            1,
            0,
            AnswerF1,
        ),
        g(
            "answer 11:30",
            text_act("get_final_answer", "11:30"),
            answers(),
            1,
            0,
            AnswerF1,
        ),
        // drag
        g(
            "drag on target",
            wire(r#"{"action":"drag","point":[[310,590],[300,420]],"text":"UP"}"#),
            drag_up(),
            1,
            1,
            Drag,
        ),
        g(
            "drag end 141 px off",
            wire(r#"{"action":"drag","point":[[300,600],[300,259]],"text":"UP"}"#),
            drag_up(),
            1,
            0,
            Drag,
        ),
        g(
            "drag wrong direction",
            wire(r#"{"action":"drag","point":[[300,600],[300,500]],"text":"DOWN"}"#),
            drag_up(),
            1,
            0,
            Drag,
        ),
        // otherwise
        g(
            "wait",
            wire(r#"{"action":"wait","point":[-100,-100]}"#),
            GroundTruthStep::of_type(Wait),
            1,
            1,
            Otherwise,
        ),
        // format failures
        g(
            "no tags, correct click",
            r#"{"action":"click","point":[105,210]}"#.to_string(),
            click(),
            0,
            0,
            Unparsed,
        ),
        g(
            "answer block before think",
            r#"<answer>{"action":"click","point":[105,210]}</answer><think>x</think>"#.to_string(),
            click(),
            0,
            1,
            Click,
        ),
        g(
            "invalid json",
            wire(r#"{"action":"click","point":[105,210]"#),
            click(),
            0,
            0,
            Unparsed,
        ),
        g(
            "action outside the enum",
            wire(r#"{"action":"hover","point":[105,210]}"#),
            click(),
            0,
            0,
            Unparsed,
        ),
        g(
            "point not numeric",
            wire(r#"{"action":"click","point":"here"}"#),
            click(),
            0,
            0,
            Unparsed,
        ),
        g(
            "type with a real point",
            wire(r#"{"action":"type","point":[5,5],"text":"Cafe A"}"#),
            GroundTruthStep::text(Type, "Cafe A"),
            0,
            1,
            TextF1,
        ),
        g(
            "scroll without direction",
            wire(r#"{"action":"scroll","point":[-100,-100],"text":"sideways"}"#),
            GroundTruthStep::text(Scroll, "DOWN"),
            0,
            0,
            TextF1,
        ),
    ]
}

/// Token F1 written independently: lowercase, split on whitespace, trim
/// punctuation from both ends of each token, count the multiset overlap.
pub fn oracle_f1(pred: &str, reference: &str) -> f64 {
    let toks = |s: &str| -> Vec<String> {
        let mut v: Vec<String> = s
            .split_whitespace()
            .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        v.sort();
        v
    };
    let (a, b) = (toks(pred), toks(reference));
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    if common == 0 {
        return 0.0;
    }
    let p = common as f64 / a.len() as f64;
    let r = common as f64 / b.len() as f64;
    2.0 * p * r / (p + r)
}

/// Inside the closed box, or within `tol` of its center (squared distances).
pub fn oracle_click(x: f64, y: f64, b: &BBox, tol: f64) -> bool {
    let inside = x >= b.x as f64 && x <= (b.x + b.w) as f64 && y >= b.y as f64 && y <= (b.y + b.h) as f64;
    let cx = b.x as f64 + b.w as f64 / 2.0;
    let cy = b.y as f64 + b.h as f64 / 2.0;
    inside || (x - cx).powi(2) + (y - cy).powi(2) <= tol * tol
}
