
# Services package
