//! The 13-joint body model: canonical joint order, limb topology and
//! evaluation clusters.

/// Body joints in the canonical output order. Every per-joint array in this
/// crate is indexed by `Joint as usize`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(usize)]
pub enum Joint {
    Head = 0,
    ShoulderRight = 1,
    ShoulderLeft = 2,
    HipLeft = 3,
    HipRight = 4,
    ElbowRight = 5,
    ElbowLeft = 6,
    WristRight = 7,
    WristLeft = 8,
    KneeRight = 9,
    KneeLeft = 10,
    AnkleRight = 11,
    AnkleLeft = 12,
}

pub const JOINT_COUNT: usize = 13;

pub const ALL_JOINTS: [Joint; JOINT_COUNT] = [
    Joint::Head,
    Joint::ShoulderRight,
    Joint::ShoulderLeft,
    Joint::HipLeft,
    Joint::HipRight,
    Joint::ElbowRight,
    Joint::ElbowLeft,
    Joint::WristRight,
    Joint::WristLeft,
    Joint::KneeRight,
    Joint::KneeLeft,
    Joint::AnkleRight,
    Joint::AnkleLeft,
];

impl Joint {
    pub fn name(self) -> &'static str {
        match self {
            Joint::Head => "head",
            Joint::ShoulderRight => "shoulder_right",
            Joint::ShoulderLeft => "shoulder_left",
            Joint::HipLeft => "hip_left",
            Joint::HipRight => "hip_right",
            Joint::ElbowRight => "elbow_right",
            Joint::ElbowLeft => "elbow_left",
            Joint::WristRight => "wrist_right",
            Joint::WristLeft => "wrist_left",
            Joint::KneeRight => "knee_right",
            Joint::KneeLeft => "knee_left",
            Joint::AnkleRight => "ankle_right",
            Joint::AnkleLeft => "ankle_left",
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        ALL_JOINTS.get(index).copied()
    }
}

/// Limb connectivity used for rendering skeletons and emitting synthetic
/// events along bones.
pub const LIMBS: [(Joint, Joint); 14] = [
    (Joint::Head, Joint::ShoulderRight),
    (Joint::Head, Joint::ShoulderLeft),
    (Joint::ShoulderRight, Joint::ShoulderLeft),
    (Joint::ShoulderRight, Joint::HipRight),
    (Joint::ShoulderLeft, Joint::HipLeft),
    (Joint::HipLeft, Joint::HipRight),
    (Joint::ShoulderRight, Joint::ElbowRight),
    (Joint::ElbowRight, Joint::WristRight),
    (Joint::ShoulderLeft, Joint::ElbowLeft),
    (Joint::ElbowLeft, Joint::WristLeft),
    (Joint::HipRight, Joint::KneeRight),
    (Joint::KneeRight, Joint::AnkleRight),
    (Joint::HipLeft, Joint::KneeLeft),
    (Joint::KneeLeft, Joint::AnkleLeft),
];

/// Joint clusters reported alongside per-joint metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cluster {
    Torso,
    Arms,
    Legs,
}

impl Cluster {
    pub fn name(self) -> &'static str {
        match self {
            Cluster::Torso => "torso",
            Cluster::Arms => "arms",
            Cluster::Legs => "legs",
        }
    }

    pub fn members(self) -> &'static [Joint] {
        match self {
            Cluster::Torso => &[
                Joint::Head,
                Joint::ShoulderRight,
                Joint::ShoulderLeft,
                Joint::HipLeft,
                Joint::HipRight,
            ],
            Cluster::Arms => &[
                Joint::ElbowRight,
                Joint::ElbowLeft,
                Joint::WristRight,
                Joint::WristLeft,
            ],
            Cluster::Legs => &[
                Joint::KneeRight,
                Joint::KneeLeft,
                Joint::AnkleRight,
                Joint::AnkleLeft,
            ],
        }
    }
}

pub const ALL_CLUSTERS: [Cluster; 3] = [Cluster::Torso, Cluster::Arms, Cluster::Legs];
