
# Component package
