#![allow(dead_code)]

pub mod golden;
pub mod grpo;

use webfactory::sitegen::{synthesize_site, SiteBundle, SiteSpec};
use webfactory::taskfactory::*;

/// MealDash bundle whose "Cafe A" opens at 11:00 on Sunday.
pub fn mealdash() -> SiteBundle {
    synthesize_site(&SiteSpec::new("mealdash", 5), 1).unwrap()
}

pub fn candidate(bundle: &SiteBundle, id: &str) -> Task {
    instantiate_templates(bundle, &builtin_templates(), &DifficultyMix::default(), 0)
        .unwrap()
        .into_iter()
        .map(|(_, t)| t)
        .find(|t| t.id == id)
        .unwrap_or_else(|| panic!("no candidate {id}"))
}

/// The search → detail → Sunday-opening-time retrieval task.
pub fn cafe_task(bundle: &SiteBundle) -> Task {
    attach_gold_path(
        &candidate(bundle, "mealdash-retrieval_search-cafe_a-sunday_open"),
        bundle,
    )
    .unwrap()
}

pub fn tasks(bundle: &SiteBundle, count: usize, seed: u64) -> Vec<Task> {
    generate_task_set(bundle, &TaskGenConfig::new(count, seed))
        .unwrap()
        .tasks
}

/// Ten-page MealDash bundle with simple and medium tasks only.
pub fn toy() -> (SiteBundle, Vec<Task>) {
    let bundle = synthesize_site(&SiteSpec::new("mealdash", 4), 14).unwrap();
    let cfg = TaskGenConfig {
        difficulty_mix: DifficultyMix {
            simple: 1.0,
            medium: 1.0,
            complex: 0.0,
        },
        ..TaskGenConfig::new(40, 14)
    };
    let tasks = generate_task_set(&bundle, &cfg).unwrap().tasks;
    (bundle, tasks)
}
