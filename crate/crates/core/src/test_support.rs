use std::sync::Arc;

use crate::catalog::{DatasetDraft, DatasetMeta, DraftFile};
use crate::clock::ManualClock;
use crate::config::{HubConfig, PasswordCost};
use crate::hub::{DataHub, Principal};
use crate::model::*;

pub const PASSWORD: &str = "correct horse battery";

pub fn hub_with_clock() -> (tempfile::TempDir, DataHub, Arc<ManualClock>) {
    let dir = tempfile::tempdir().unwrap();
    let mut config = HubConfig::new(dir.path().join("data"));
    config.password_cost = PasswordCost::insecure_fast();
    let clock = Arc::new(ManualClock::new(Timestamp::from_micros(
        1_700_000_000_000_000,
    )));
    let hub = DataHub::open_with_clock(config, clock.clone()).unwrap();
    (dir, hub, clock)
}

pub fn user(hub: &DataHub, name: &str) -> UserAccount {
    hub.register(name, &format!("{name}@example.org"), PASSWORD, name)
        .unwrap()
}

pub fn principal(hub: &DataHub, id: UserId) -> Principal {
    Principal {
        user: hub.user_by_id(id).unwrap(),
        token_id: None,
    }
}

fn create(
    hub: &DataHub,
    owner: UserId,
    name: &str,
    visibility: Visibility,
    tags: &[&str],
    orgs: &[OrgId],
    files: &[(&str, &[u8])],
) -> Dataset {
    hub.create_dataset(
        owner,
        DatasetDraft {
            meta: DatasetMeta {
                name: name.into(),
                visibility: Some(visibility),
                tags: tags.iter().map(|t| t.to_string()).collect(),
                org_ids: orgs.iter().copied().collect(),
                ..Default::default()
            },
            files: files
                .iter()
                .map(|(p, b)| DraftFile::bytes(p, b.to_vec()))
                .collect(),
        },
    )
    .unwrap()
}

pub fn dataset(
    hub: &DataHub,
    owner: UserId,
    name: &str,
    visibility: Visibility,
    tags: &[&str],
    files: &[(&str, &[u8])],
) -> Dataset {
    create(hub, owner, name, visibility, tags, &[], files)
}

pub fn org_dataset(
    hub: &DataHub,
    owner: UserId,
    name: &str,
    orgs: &[OrgId],
    files: &[(&str, &[u8])],
) -> Dataset {
    create(hub, owner, name, Visibility::OrgOnly, &[], orgs, files)
}
