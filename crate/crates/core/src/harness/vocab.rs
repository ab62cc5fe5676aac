//! Fixed vocabularies for synthetic message content.

pub const PATIENT_COUNT: u32 = 100;
pub const DOCTOR_COUNT: u32 = 12;

/// `(data_type, inclusive value range)`.
pub const VITALS: &[(&str, (u32, u32))] = &[
    ("heart_rate", (45, 140)),
    ("systolic_bp", (85, 190)),
    ("temperature_dc", (355, 405)),
    ("spo2", (82, 100)),
    ("respiratory_rate", (8, 32)),
    ("glucose_mgdl", (60, 320)),
];

pub const DIAGNOSES: &[&str] = &[
    "pneumonia",
    "sepsis",
    "myocardial_infarction",
    "type2_diabetes",
    "copd_exacerbation",
    "appendicitis",
    "ischemic_stroke",
    "heart_failure",
];

pub const TREATMENTS: &[&str] = &[
    "amoxicillin",
    "iv_fluids",
    "aspirin_clopidogrel",
    "metformin",
    "nebulized_salbutamol",
    "laparoscopic_appendectomy",
    "alteplase",
    "furosemide",
];

pub const ALERT_TYPES: &[&str] = &[
    "cardiac_arrest",
    "stroke_code",
    "sepsis_alert",
    "rapid_response",
    "trauma_activation",
];

pub const SEVERITIES: &[&str] = &["low", "moderate", "high", "critical"];

pub const LOCATIONS: &[&str] = &[
    "ER-1", "ER-2", "ICU-1", "ICU-2", "WARD-3", "OR-1", "CATH-LAB",
];
