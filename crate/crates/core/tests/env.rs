use webfactory::env::*;
use webfactory::sitegen::*;
use webfactory::Error;

fn bundle(ui: u8) -> SiteBundle {
    synthesize_site(&SiteSpec::new("mealdash", 5).with_ui(ui), 11).unwrap()
}

fn start<'a>(env: &Env<'a>, url: &str) -> EnvState {
    env.reset_at(url, "goal", 3).unwrap().0
}

fn click_el(env: &Env, s: &EnvState, id: &str) -> (EnvState, StepEvents) {
    let obs = env.observe(s);
    let el = obs.element(id).unwrap_or_else(|| panic!("{id} not visible"));
    let (x, y) = Env::click_point(&el.bbox);
    let (n, _, ev) = env.step(s, &StructuredAction::click(x, y)).unwrap();
    (n, ev)
}

// band-intersection oracle written independently of the env
fn band_oracle(lo: i32, hi: i32, offset: i32, viewport: i32) -> bool {
    (lo.max(offset)) < (hi.min(offset + viewport))
}

#[test]
fn band_visibility_matches_oracle() {
    assert!(band_visible(600, 900, 0));
    for lo in (0..3000).step_by(97) {
        for len in [1, 48, 300, 1200] {
            for off in (0..2048).step_by(128) {
                assert_eq!(
                    band_visible(lo, lo + len, off),
                    band_oracle(lo, lo + len, off, VIEWPORT_H)
                );
            }
        }
    }
}

#[test]
fn reset_is_deterministic_and_rejects_unknown_start() {
    let b = bundle(0);
    let env = Env::new(&b);
    let (s1, o1) = env.reset_at("/mealdash", "g", 3).unwrap();
    let (s2, o2) = env.reset_at("/mealdash", "g", 3).unwrap();
    assert_eq!(s1, s2);
    assert_eq!(o1, o2);
    assert_eq!(env.state_hash(&s1), env.state_hash(&s2));
    assert_eq!(s1.current_page, "home");
    assert_eq!(s1.step_count, 0);
    assert!(s1.session.form_values.contains_key("profile.user"));
    let err = env.reset_at("/mealdash/nowhere", "g", 3).unwrap_err().to_string();
    assert!(err.contains("/mealdash/nowhere"), "{err}");
}

#[test]
fn click_navigates_and_appends_key_nodes() {
    let b = bundle(0);
    let env = Env::new(&b);
    let s = start(&env, "/mealdash");
    let (s, ev) = click_el(&env, &s, "nav_browse");
    assert_eq!(s.current_page, "catalog");
    assert_eq!(ev.key_nodes_newly_hit, ["catalog_list"]);
    let (s, _) = click_el(&env, &s, "item_cafe_a");
    assert_eq!(s.current_page, "detail_cafe_a");
    assert_eq!(s.key_nodes_hit, ["catalog_list", "cafe_a_detail_page"]);
    let (s, ev) = click_el(&env, &s, "add_to_cart");
    assert!(s.cart_contains("restaurants/cafe_a"));
    assert_eq!(ev.key_nodes_newly_hit, ["add_to_cart"]);
    // a second add does not duplicate the key node
    let (s, ev) = click_el(&env, &s, "add_to_cart");
    assert!(ev.key_nodes_newly_hit.is_empty());
    assert_eq!(s.session.cart["restaurants/cafe_a"], 2);
}

#[test]
fn search_type_enter_reaches_results() {
    let b = bundle(0);
    let env = Env::new(&b);
    let s = start(&env, "/mealdash");
    // ENTER without text is ignored
    let (s, _) = click_el(&env, &s, "search_box");
    let (s0, _, _) = env.step(&s, &StructuredAction::keypress("ENTER")).unwrap();
    assert_eq!(s0.current_page, "home");
    let (s, _, _) = env.step(&s, &StructuredAction::type_text("Cafe A")).unwrap();
    assert_eq!(s.session.form_values["search.query"], "Cafe A");
    let (s, obs, _) = env.step(&s, &StructuredAction::keypress("ENTER")).unwrap();
    assert_eq!(s.current_page, "results");
    assert_eq!(s.key_nodes_hit, ["search_box", "results_list"]);
    assert!(obs.element("result_cafe_a").is_some());
}

#[test]
fn typing_without_focus_is_noop() {
    let b = bundle(0);
    let env = Env::new(&b);
    let s = start(&env, "/mealdash");
    let (n, _, ev) = env.step(&s, &StructuredAction::type_text("x")).unwrap();
    assert_eq!(n.session, s.session);
    assert!(ev.state_diff.is_empty());
}

#[test]
fn scroll_clamps_and_reveals_band() {
    let b = bundle(2);
    let env = Env::new(&b);
    let s = start(&env, "/mealdash/restaurant/cafe-a");
    let page = b.page("detail_cafe_a").unwrap();
    let banded: Vec<&str> = page
        .elements
        .iter()
        .filter(|e| matches!(e.visibility, Visibility::ScrollBand(..)))
        .map(|e| e.element_id.as_str())
        .collect();
    assert_eq!(banded.len(), 1);
    assert!(env.observe(&s).element(banded[0]).is_none());
    let (s1, o1, _) = env.step(&s, &StructuredAction::scroll(Direction::Down)).unwrap();
    assert_eq!(s1.scroll_offset, page.max_scroll());
    assert_eq!(o1.element(banded[0]).unwrap().bbox.y, 1096 - 512);
    // at max offset another scroll changes only step_count
    let (s2, _, ev) = env.step(&s1, &StructuredAction::scroll(Direction::Down)).unwrap();
    assert!(ev.state_diff.is_empty());
    let mut expect = s1.clone();
    expect.step_count += 1;
    assert_eq!(s2, expect);
    let (s3, _, _) = env.step(&s2, &StructuredAction::scroll(Direction::Up)).unwrap();
    assert_eq!(s3.scroll_offset, 0);
}

#[test]
fn revealed_elements_appear_after_parent_click() {
    let b = bundle(3);
    let env = Env::new(&b);
    let s = start(&env, "/mealdash/restaurant/cafe-a");
    let page = b.page("detail_cafe_a").unwrap();
    let hidden: Vec<&str> = page
        .elements
        .iter()
        .filter(|e| e.visibility == Visibility::RevealedBy("more_info".into()))
        .map(|e| e.element_id.as_str())
        .collect();
    assert!(!hidden.is_empty());
    let obs = env.observe(&s);
    assert!(hidden.iter().all(|h| obs.element(h).is_none()));
    let (s, _) = click_el(&env, &s, "more_info");
    let obs = env.observe(&s);
    assert!(hidden.iter().all(|h| obs.element(h).is_some()));
}

#[test]
fn wait_and_empty_click_change_only_step_count() {
    let b = bundle(0);
    let env = Env::new(&b);
    let s = start(&env, "/mealdash");
    for a in [
        StructuredAction::wait(),
        StructuredAction::click(1270.0, 1000.0),
        StructuredAction::click(5000.0, 5.0),
    ] {
        let (n, _, _) = env.step(&s, &a).unwrap();
        let mut expect = s.clone();
        expect.step_count = 1;
        assert_eq!(n, expect);
    }
}

#[test]
fn final_answer_terminates() {
    let b = bundle(0);
    let env = Env::new(&b);
    let s = start(&env, "/mealdash");
    let (n, _, ev) = env.step(&s, &StructuredAction::answer("11:00")).unwrap();
    assert!(n.terminal && ev.terminal);
    assert_eq!(ev.emitted_answer.as_deref(), Some("11:00"));
    assert!(matches!(
        env.step(&n, &StructuredAction::wait()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn malformed_action_rejected() {
    let b = bundle(0);
    let env = Env::new(&b);
    let s = start(&env, "/mealdash");
    let bad = StructuredAction::new(ActionKind::Type, Point::sentinel(), None);
    assert!(matches!(env.step(&s, &bad), Err(Error::InvalidAction(_))));
}

#[test]
fn cart_difference_only_changes_cart_hash() {
    let b = bundle(0);
    let env = Env::new(&b);
    let s = start(&env, "/mealdash/restaurant/cafe-a");
    let mut t = s.clone();
    t.session.cart.insert("restaurants/cafe_b".into(), 1);
    let (hs, ht) = (env.state_hash(&s), env.state_hash(&t));
    assert_eq!(hs.viewport, ht.viewport);
    assert_eq!(hs.key_nodes, ht.key_nodes);
    assert_ne!(hs.cart, ht.cart);
    let json = serde_json::to_string(&hs).unwrap();
    assert_eq!(serde_json::from_str::<ReplayHash>(&json).unwrap(), hs);
    assert_eq!(json.len(), 3 * 18 + 4);
}

#[test]
fn drag_reorders_list_items() {
    let b = bundle(3);
    let env = Env::new(&b);
    let s = start(&env, "/mealdash/favorites");
    let obs = env.observe(&s);
    let a = Env::click_point(&obs.element("fav_cafe_a").unwrap().bbox);
    let c = Env::click_point(
        &obs.element("fav_diner_a")
            .map(|e| e.bbox)
            .unwrap_or(obs.visible_elements.last().unwrap().bbox),
    );
    let (n, o, _) = env.step(&s, &StructuredAction::drag(a, c)).unwrap();
    assert_ne!(env.state_hash(&n).viewport, env.state_hash(&s).viewport);
    assert_ne!(
        o.element("fav_cafe_a").unwrap().bbox,
        obs.element("fav_cafe_a").unwrap().bbox
    );
}

#[test]
fn flows_replay_to_final_page() {
    for ui in 0..=3 {
        let b = synthesize_site(&SiteSpec::new("shopping", 4).with_ui(ui).with_depth(3), 5).unwrap();
        let env = Env::new(&b);
        for flow in &b.flows {
            let url = &b.page(&flow.steps[0].0).unwrap().url_path;
            let mut s = start(&env, url);
            for (p, e) in &flow.steps {
                assert_eq!(&s.current_page, p);
                s = click_el(&env, &s, e).0;
            }
            let (lp, le) = flow.steps.last().unwrap();
            if let Effect::Navigate(to) = &b.page(lp).unwrap().element(le).unwrap().effect {
                assert_eq!(&s.current_page, to);
            }
        }
    }
}
