use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hub::{DataHub, Page, PageRequest};
use crate::model::*;
use crate::persistence::repo;

/// Aggregate of a dataset's ratings. The raw mean is kept; `average` is the
/// display value, rounded half-up to one decimal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct RatingSummary {
    sum: u64,
    count: u64,
}

impl RatingSummary {
    pub fn from_sum(sum: u64, count: u64) -> Self {
        RatingSummary { sum, count }
    }

    pub fn from_ratings(ratings: impl IntoIterator<Item = u8>) -> Self {
        ratings
            .into_iter()
            .fold(RatingSummary::default(), |acc, r| RatingSummary {
                sum: acc.sum + r as u64,
                count: acc.count + 1,
            })
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn raw_mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum as f64 / self.count as f64)
    }

    /// floor(10 * sum / count + 1/2) / 10, in integer arithmetic so that
    /// ties like 3.25 round up regardless of float representation.
    pub fn average(&self) -> Option<f64> {
        (self.count > 0).then(|| {
            let tenths = (20 * self.sum + self.count) / (2 * self.count);
            tenths as f64 / 10.0
        })
    }
}

#[derive(Serialize, Deserialize)]
struct RatingSummaryWire {
    average: Option<f64>,
    count: u64,
}

impl Serialize for RatingSummary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RatingSummaryWire {
            average: self.average(),
            count: self.count,
        }
        .serialize(s)
    }
}

#[derive(Clone, Debug, Default)]
pub struct ReviewChanges {
    pub rating: Option<i64>,
    pub comment: Option<String>,
}

impl DataHub {
    pub fn submit_review(
        &self,
        author: UserId,
        dataset_id: DatasetId,
        rating: i64,
        comment: &str,
    ) -> Result<Review> {
        let rating = Rating::new(rating)?;
        validate_comment(comment)?;
        let now = self.now();
        let review = self.store.with_transaction(|tx| {
            let dataset = self.visible_dataset_in(tx, Some(author), dataset_id)?;
            if dataset.owner_id == author {
                return Err(Error::forbidden("owners cannot review their own dataset"));
            }
            if repo::reviews::find(tx, dataset_id, author)?.is_some() {
                return Err(Error::conflict("you already reviewed this dataset"));
            }
            let review = Review {
                id: ReviewId::new(),
                dataset_id,
                author_id: author,
                rating,
                comment: comment.to_owned(),
                created_at: now,
                updated_at: now,
            };
            repo::reviews::insert(tx, &review).map_err(|e| {
                if e.is_unique_violation() {
                    Error::conflict("you already reviewed this dataset")
                } else {
                    e
                }
            })?;
            Ok((review, dataset.owner_id))
        });
        let (review, owner) = review?;
        if let Err(err) = self.emit_review_received(&review, owner) {
            tracing::warn!(review = %review.id, %err, "failed to emit review notification");
        }
        Ok(review)
    }

    pub fn update_review(
        &self,
        caller: UserId,
        id: ReviewId,
        changes: ReviewChanges,
    ) -> Result<Review> {
        let rating = changes.rating.map(Rating::new).transpose()?;
        if let Some(comment) = &changes.comment {
            validate_comment(comment)?;
        }
        let now = self.now();
        self.store.with_transaction(|tx| {
            let mut review =
                repo::reviews::get(tx, id)?.ok_or_else(|| Error::not_found("review"))?;
            if review.author_id != caller {
                return Err(Error::forbidden("only the author may edit a review"));
            }
            if let Some(rating) = rating {
                review.rating = rating;
            }
            if let Some(comment) = changes.comment {
                review.comment = comment;
            }
            review.updated_at = now.max(review.updated_at);
            repo::reviews::update(tx, &review)?;
            Ok(review)
        })
    }

    pub fn delete_review(&self, caller: &UserAccount, id: ReviewId) -> Result<()> {
        self.store.with_transaction(|tx| {
            let review = repo::reviews::get(tx, id)?.ok_or_else(|| Error::not_found("review"))?;
            if review.author_id != caller.id && !caller.is_admin {
                return Err(Error::forbidden("only the author may delete a review"));
            }
            repo::reviews::delete(tx, id)?;
            Ok(())
        })
    }

    /// Newest first.
    pub fn list_reviews(
        &self,
        viewer: Option<UserId>,
        dataset_id: DatasetId,
        req: PageRequest,
    ) -> Result<Page<Review>> {
        let req = PageRequest::new(req.page, req.page_size)?;
        self.store.read(|c| {
            self.visible_dataset_in(c, viewer, dataset_id)?;
            let items = repo::reviews::list_for_dataset(c, dataset_id, req.page, req.page_size)?;
            let total = repo::reviews::count_for_dataset(c, dataset_id)?;
            Ok(Page::new(items, req, total))
        })
    }

    pub fn rating_summary(&self, dataset_id: DatasetId) -> Result<RatingSummary> {
        self.store.read(|c| {
            if repo::datasets::get(c, dataset_id)?.is_none() {
                return Err(Error::not_found("dataset"));
            }
            Ok(RatingSummary::from_ratings(repo::reviews::ratings(
                c, dataset_id,
            )?))
        })
    }
}
