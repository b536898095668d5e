"""Published confusion matrices and score tables used as oracle fixtures.

Row order everywhere: Marine Debris, Algae/Organic Material, Ship, Cloud,
Water. Confusion rows are ground truth, columns are predictions.
"""

CLASS_NAMES = ("Marine Debris", "Algae/Organic Material", "Ship", "Cloud", "Water")

# semi-supervised model, 70% labeled data
CONFUSION_SEMI_70 = [
    [335, 16, 12, 0, 14],
    [22, 1643, 2, 0, 23],
    [13, 0, 1077, 0, 75],
    [0, 0, 15, 26379, 6449],
    [88, 53, 99, 91, 158217],
]
IOU_SEMI_70 = (0.67, 0.93, 0.83, 0.80, 0.96)

# fully-supervised model, 40% labeled data
CONFUSION_FULLY_40 = [
    [342, 9, 8, 0, 18],
    [33, 1580, 0, 0, 77],
    [15, 0, 1060, 0, 90],
    [0, 0, 0, 32260, 583],
    [51, 17, 111, 280, 158089],
]
IOU_FULLY_40 = (0.72, 0.92, 0.83, 0.97, 0.99)

# semi-supervised model, 40% labeled data
CONFUSION_SEMI_40 = [
    [347, 4, 14, 0, 12],
    [32, 1578, 2, 0, 78],
    [20, 0, 1084, 0, 61],
    [0, 0, 0, 32622, 221],
    [177, 25, 85, 277, 157984],
]
IOU_SEMI_40 = (0.57, 0.92, 0.86, 0.98, 0.99)

# signed test-IoU differences (semi minus fully, percentage points) across the
# nine labeled-data percentages 5..80
IOU_DIFFERENCES = {
    "Marine Debris": [10, -3, 6, 7, -15, 4, 6, -2, -3],
    "Algae/Organic Material": [9, 4, 4, -1, 0, -2, 1, 1, -1],
    "Ship": [3, 5, 7, 3, 3, -6, 4, 0, -2],
    "Cloud": [24, 14, 22, 4, 1, -12, -1, -17, 1],
    "Water": [8, 3, 4, 1, 0, -2, 0, -3, 0],
}
DIFFERENCE_VARIANCES = {
    "Marine Debris": 60.50,
    "Algae/Organic Material": 15.13,
    "Ship": 19.63,
    "Cloud": 213.50,
    "Water": 12.88,
}

# grouped-dataset labeled pixel counts and percentages
CLASS_PIXEL_COUNTS = {
    "Marine Debris": 3_399,
    "Algae/Organic Material": 6_018,
    "Ship": 5_803,
    "Cloud": 117_400,
    "Water": 704_757,
}
CLASS_PIXEL_PERCENTAGES = {
    "Marine Debris": 0.41,
    "Algae/Organic Material": 0.72,
    "Ship": 0.69,
    "Cloud": 14.02,
    "Water": 84.16,
}
