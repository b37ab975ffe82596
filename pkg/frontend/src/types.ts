/** Wire types mirroring the session service HTTP API. */

export interface ItemView {
  id: number;
  payload: string;
}

export interface QueryView {
  query_id: string;
  head: ItemView;
  /** Body items in server presentation order. */
  body: ItemView[];
  batch_index: number;
  /** 1-based position within the batch. */
  batch_position: number;
  batch_size: number;
}

export interface SubmitAck {
  accepted: boolean;
  query_id: string;
  repeat?: boolean;
  batch_index?: number;
  batch_valid?: boolean | null;
  duplicate?: boolean;
}

export interface ValidityStats {
  batches_started: number;
  batches_resolved: number;
  batches_valid: number;
  batches_invalid: number;
  responses_total: number;
  responses_in_fit: number;
}

export interface SnapshotView {
  session_id: string;
  n_items: number;
  dim: number;
  coordinates: number[][];
  metric_history: {
    round: number;
    normalized_count: number;
    holdout_acc: number | null;
    coherence: number | null;
    label_seconds: number | null;
  }[];
  validity: ValidityStats;
  exhausted: boolean;
}

/** One completed response as recorded client-side for timing summaries. */
export interface TimingRecord {
  queryId: string;
  tupleSize: number;
  elapsedSeconds: number;
}
